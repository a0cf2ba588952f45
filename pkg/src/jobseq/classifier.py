"""Sequence assembly and the bias-regularized employment classifier.

Per student, the model consumes the six per-semester embedding vectors as a
sequence through the masked LSTM, concatenates the final hidden state with
the four demographic indicators, and applies a logistic output head trained
under squared error. Two regularizers are supported on the head's
demographic weight block W:

  * ``bias_reg``: 1/2 sum over major pairs of ||W (u_m - u_n)||_F^2, where
    u_m is the major's bias profile. Only directions in which profiles
    disagree are penalized.
  * ``l2``: ||W||_F^2.

Sequences are exchanged as flat feature matrices with layout
[semester_1 code .. semester_T code, gender, nation, hometown_level,
enroll_status], the same layout the minority-class generator produces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from ._math import dsigmoid_from_output, sigmoid
from .autoencoder import AcademicEmbedding
from .bias import BiasProfile
from .cohort import ASPECTS, NUM_SEMESTERS, Cohort
from .errors import NumericalError, ValidationError
from .lstm import (
    Gradients,
    LstmParams,
    MaskSet,
    backward,
    forward,
    identity_masks,
    init_lstm_params,
    sample_masks,
)

DEMOGRAPHIC_DIM = len(ASPECTS)


@dataclass
class StudentSequence:
    student_id: str
    inputs: np.ndarray  # (num_semesters, code_dim)
    demographics: np.ndarray  # (4,)
    major_id: int
    label: int


def assemble_sequences(
    cohort: Cohort, embedding: AcademicEmbedding, num_semesters: int = NUM_SEMESTERS
) -> list[StudentSequence]:
    """One sequence per student; semesters the student skipped use the
    encoder's zero-row code. ``num_semesters`` < 6 truncates the horizon."""
    if not (1 <= num_semesters <= NUM_SEMESTERS):
        raise ValidationError(f"num_semesters {num_semesters} outside [1, {NUM_SEMESTERS}]")
    sequences = []
    for s in cohort.students:
        inputs = np.stack(
            [embedding.vector_for(s.student_id, t) for t in range(1, num_semesters + 1)]
        )
        sequences.append(
            StudentSequence(
                student_id=s.student_id,
                inputs=inputs,
                demographics=s.demographics(),
                major_id=s.major_id,
                label=s.label,
            )
        )
    return sequences


def sequence_matrix(sequences: list[StudentSequence]) -> tuple[np.ndarray, np.ndarray]:
    """Flatten sequences to the (N, T*k + 4) feature matrix plus labels."""
    if not sequences:
        raise ValidationError("no sequences given")
    X = np.stack(
        [np.concatenate([seq.inputs.ravel(), seq.demographics]) for seq in sequences]
    )
    y = np.array([seq.label for seq in sequences], dtype=int)
    return X, y


def split_features(X: np.ndarray, code_dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Unflatten a feature matrix into ((T, N, k) inputs, (N, 4) demographics)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    seq_width = X.shape[1] - DEMOGRAPHIC_DIM
    if seq_width <= 0 or seq_width % code_dim != 0:
        raise ValidationError(
            f"feature width {X.shape[1]} is not T*{code_dim} + {DEMOGRAPHIC_DIM}"
        )
    t_len = seq_width // code_dim
    seq = X[:, :seq_width].reshape(X.shape[0], t_len, code_dim).transpose(1, 0, 2)
    demo = X[:, seq_width:]
    return np.ascontiguousarray(seq), demo


# ---------------------------------------------------------------------------
# output head and bias regularizer


@dataclass
class OutputHead:
    """Logistic head on [h_T ; demographics]; ``w`` is (1, H + 4)."""

    w: np.ndarray
    b: float
    hidden_size: int

    @property
    def bias_block(self) -> np.ndarray:
        # View, not copy: updates through the head are seen by the block.
        return self.w[:, self.hidden_size:]

    def copy(self) -> "OutputHead":
        return OutputHead(w=self.w.copy(), b=self.b, hidden_size=self.hidden_size)


def init_head(hidden_size: int, rng: np.random.Generator) -> OutputHead:
    r = 1.0 / np.sqrt(hidden_size + DEMOGRAPHIC_DIM)
    return OutputHead(
        w=rng.uniform(-r, r, size=(1, hidden_size + DEMOGRAPHIC_DIM)),
        b=0.0,
        hidden_size=hidden_size,
    )


def _profile_vectors(profiles) -> list[np.ndarray]:
    vectors = []
    for p in profiles:
        u = p.u if isinstance(p, BiasProfile) else np.asarray(p, dtype=float)
        vectors.append(u)
    if vectors:
        dim = vectors[0].shape[0]
        if any(v.shape != (dim,) for v in vectors):
            raise ValidationError("bias profiles have inconsistent dimensions")
    return vectors


def bias_penalty(w_block: np.ndarray, profiles) -> float:
    """1/2 sum over unordered major pairs of ||W (u_m - u_n)||_F^2."""
    w = np.atleast_2d(np.asarray(w_block, dtype=float))
    us = _profile_vectors(profiles)
    if us and us[0].shape[0] != w.shape[1]:
        raise ValidationError(
            f"profile dim {us[0].shape[0]} does not match weight block width {w.shape[1]}"
        )
    total = 0.0
    for m in range(len(us)):
        for n in range(m + 1, len(us)):
            diff = us[m] - us[n]
            total += float(np.sum((w @ diff) ** 2))
    return 0.5 * total


def profile_pair_gram(profiles) -> np.ndarray:
    """Sum over major pairs of (u_m - u_n)(u_m - u_n)^T."""
    us = _profile_vectors(profiles)
    if not us:
        return np.zeros((0, 0))
    s = np.zeros((us[0].shape[0], us[0].shape[0]))
    for m in range(len(us)):
        for n in range(m + 1, len(us)):
            diff = us[m] - us[n]
            s += np.outer(diff, diff)
    return s


def bias_penalty_grad(w_block: np.ndarray, profiles) -> np.ndarray:
    """Gradient of bias_penalty: sum over pairs of W (u_m - u_n)(u_m - u_n)^T."""
    w = np.atleast_2d(np.asarray(w_block, dtype=float))
    us = _profile_vectors(profiles)
    if not us:
        return np.zeros_like(w)
    return w @ profile_pair_gram(us)


# ---------------------------------------------------------------------------
# model, losses, gradients


@dataclass
class SequenceModel:
    lstm: LstmParams
    head: OutputHead
    code_dim: int
    num_semesters: int


@dataclass
class ModelGradients:
    lstm: Gradients
    w: np.ndarray  # (1, H + 4)
    b: float


def _forward_batch(model: SequenceModel, X, masks):
    seq, demo = split_features(X, model.code_dim)
    if masks is None:
        masks = identity_masks(model.lstm.hidden_size)
    hs, cache = forward(model.lstm, seq, masks)
    feats = np.concatenate([hs[-1], demo], axis=1)
    logits = feats @ model.head.w[0] + model.head.b
    y_hat = sigmoid(logits)
    return y_hat, feats, cache, masks, seq.shape[0]


def _check_batch(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValidationError("empty batch")
    if y.shape != (X.shape[0],):
        raise ValidationError("labels do not match batch size")
    return X, y.astype(float)


def total_loss(model: SequenceModel, X, y, profiles, masks=None) -> float:
    """Squared-error data term plus the pairwise bias penalty:
    1/2 sum_i (yhat_i - y_i)^2 + bias_penalty(W_block, profiles)."""
    X, y = _check_batch(X, y)
    y_hat, _, _, _, _ = _forward_batch(model, X, masks)
    return 0.5 * float(np.sum((y_hat - y) ** 2)) + bias_penalty(model.head.bias_block, profiles)


def l2_loss(model: SequenceModel, X, y, masks=None) -> float:
    """Squared-error data term plus ||W_block||_F^2 on the same block."""
    X, y = _check_batch(X, y)
    y_hat, _, _, _, _ = _forward_batch(model, X, masks)
    return 0.5 * float(np.sum((y_hat - y) ** 2)) + float(np.sum(model.head.bias_block**2))


def _data_gradients(model: SequenceModel, X, y, masks):
    """Gradients of the squared-error sum through head and LSTM."""
    y_hat, feats, cache, masks, t_len = _forward_batch(model, X, masks)
    resid = y_hat - y
    dz = resid * dsigmoid_from_output(y_hat)  # (N,)
    d_w = (dz[:, None] * feats).sum(axis=0)[None, :]
    d_b = float(dz.sum())
    h = model.lstm.hidden_size
    d_h = np.zeros_like(cache.h)
    d_h[-1] = np.outer(dz, model.head.w[0, :h])
    lstm_grads = backward(model.lstm, cache, masks, d_h)
    data_loss = 0.5 * float(np.sum(resid**2))
    return data_loss, lstm_grads, d_w, d_b


def total_loss_grads(model: SequenceModel, X, y, profiles, masks=None) -> ModelGradients:
    """Analytic gradient of total_loss for every trainable tensor; the
    demographic block of the head additionally receives the pairwise
    penalty term W (u_m - u_n)(u_m - u_n)^T summed over pairs."""
    X, y = _check_batch(X, y)
    _, lstm_grads, d_w, d_b = _data_gradients(model, X, y, masks)
    h = model.head.hidden_size
    d_w[:, h:] += bias_penalty_grad(model.head.bias_block, profiles)
    return ModelGradients(lstm=lstm_grads, w=d_w, b=d_b)


def l2_loss_grads(model: SequenceModel, X, y, masks=None) -> ModelGradients:
    X, y = _check_batch(X, y)
    _, lstm_grads, d_w, d_b = _data_gradients(model, X, y, masks)
    h = model.head.hidden_size
    d_w[:, h:] += 2.0 * model.head.bias_block
    return ModelGradients(lstm=lstm_grads, w=d_w, b=d_b)


def predict_proba_matrix(model: SequenceModel, X) -> np.ndarray:
    """Employment probability per row; prediction mode (all units active)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y_hat, _, _, _, _ = _forward_batch(model, X, None)
    return y_hat


def predict_labels(model: SequenceModel, X) -> np.ndarray:
    """Probability >= 0.5 maps to label 1 (ties resolve to 1)."""
    return (predict_proba_matrix(model, X) >= 0.5).astype(int)


def predict_sequence(model: SequenceModel, seq: StudentSequence) -> tuple[float, int]:
    X, _ = sequence_matrix([seq])
    p = float(predict_proba_matrix(model, X)[0])
    return p, int(p >= 0.5)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 300
    dropout_rate: float = 0.3
    seed: int = 0
    loss_mode: str = "bias_reg"  # or "l2"
    bias_weight_mode: str = "as_written"  # or "complement"; applied upstream
    hidden_size: int = 16
    code_dim: int = 3
    resample_masks_per_step: bool = False
    diagnostic_force_l2: bool = False  # wiring check: bias_reg path, l2 term

    def validate(self):
        if self.learning_rate < 0:
            raise ValidationError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ValidationError("dropout_rate must lie in [0, 1)")
        if self.loss_mode not in ("bias_reg", "l2"):
            raise ValidationError(f"unknown loss_mode {self.loss_mode!r}")
        if self.bias_weight_mode not in ("as_written", "complement"):
            raise ValidationError(f"unknown bias_weight_mode {self.bias_weight_mode!r}")
        if self.hidden_size < 1 or self.code_dim < 1:
            raise ValidationError("hidden_size and code_dim must be >= 1")

    def to_json(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "dropout_rate": self.dropout_rate,
            "seed": self.seed,
            "loss_mode": self.loss_mode,
            "bias_weight_mode": self.bias_weight_mode,
            "hidden_size": self.hidden_size,
            "code_dim": self.code_dim,
            "resample_masks_per_step": self.resample_masks_per_step,
            "diagnostic_force_l2": self.diagnostic_force_l2,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TrainConfig":
        return cls(**d)


def _regularizer(config: TrainConfig, profiles, w_block):
    """Returns (value_fn, grad_fn) closures over the live weight block."""
    if config.loss_mode == "l2" or config.diagnostic_force_l2:
        return (lambda: float(np.sum(w_block() ** 2)), lambda: 2.0 * w_block())
    if profiles is None or len(profiles) == 0:
        raise ValidationError("loss_mode 'bias_reg' requires bias profiles")
    gram = profile_pair_gram(profiles)
    if gram.shape[0] != DEMOGRAPHIC_DIM:
        raise ValidationError(
            f"bias profiles must have dimension {DEMOGRAPHIC_DIM}, got {gram.shape[0]}"
        )
    return (
        lambda: 0.5 * float(np.sum((w_block() @ gram) * w_block())),
        lambda: w_block() @ gram,
    )


def train_classifier(
    X, y, profiles, config: TrainConfig
) -> tuple[SequenceModel, list[float]]:
    """Full-batch gradient descent on the chosen objective
    (1/2 sum of squared errors plus the configured regularizer).

    A fresh mask set is drawn for every sequence at every epoch. The
    per-epoch objective is recorded before each update.
    """
    config.validate()
    X, y = _check_batch(X, y)
    n = X.shape[0]
    seq, _ = split_features(X, config.code_dim)  # validates the layout
    num_semesters = seq.shape[0]
    rng = np.random.default_rng(config.seed)
    lstm = init_lstm_params(config.code_dim, config.hidden_size, rng)
    head = init_head(config.hidden_size, rng)
    model = SequenceModel(
        lstm=lstm, head=head, code_dim=config.code_dim, num_semesters=num_semesters
    )
    reg_value, reg_grad = _regularizer(config, profiles, lambda: head.bias_block)

    history: list[float] = []
    hdim = config.hidden_size
    lr = config.learning_rate
    for epoch in range(config.epochs):
        if config.dropout_rate > 0:
            if config.resample_masks_per_step:
                masks = _per_step_masks(config.dropout_rate, hdim, num_semesters, n, rng)
            else:
                masks = sample_masks(config.dropout_rate, hdim, n=n, rng=rng)
        else:
            masks = identity_masks(hdim)
        data_loss, lstm_grads, d_w, d_b = _data_gradients(model, X, y, masks)
        objective = data_loss + reg_value()
        if not np.isfinite(objective):
            raise NumericalError(f"training objective became non-finite at epoch {epoch}")
        history.append(objective)

        for name in PARAM_NAMES:
            arr = getattr(lstm, name)
            arr -= lr * getattr(lstm_grads, name)
        d_w[:, hdim:] += reg_grad()
        head.w -= lr * d_w
        head.b -= lr * d_b
    return model, history


PARAM_NAMES = (
    "w_xi", "w_hi", "w_ci", "b_i",
    "w_xf", "w_hf", "w_cf", "b_f",
    "w_xc", "w_hc", "b_c",
    "w_xo", "w_ho", "w_co", "b_o",
)


def _per_step_masks(rate, hidden_size, t_len, n, rng):
    """Ablation mode: independent masks at every timestep, shape (T, N, H)."""
    sets = [sample_masks(rate, hidden_size, n=n, rng=rng) for _ in range(t_len)]
    return MaskSet(
        m_i=np.stack([m.m_i for m in sets]),
        m_f=np.stack([m.m_f for m in sets]),
        m_c=np.stack([m.m_c for m in sets]),
        m_o=np.stack([m.m_o for m in sets]),
        m_h=np.stack([m.m_h for m in sets]),
        dropout_rate=rate,
    )


# ---------------------------------------------------------------------------
# sklearn-style estimator


class EmploymentLstm(BaseEstimator, ClassifierMixin):
    """Masked-LSTM employment classifier over flat sequence features.

    X rows follow the package's feature layout: ``num_semesters`` code
    vectors of width ``code_dim``, then the four demographic indicators.
    ``profiles`` (per-major bias profiles) are required for the
    ``bias_reg`` loss and are passed to ``fit``.
    """

    def __init__(
        self,
        hidden_size: int = 16,
        code_dim: int = 3,
        epochs: int = 300,
        learning_rate: float = 0.01,
        dropout_rate: float = 0.3,
        loss_mode: str = "bias_reg",
        bias_weight_mode: str = "as_written",
        resample_masks_per_step: bool = False,
        seed: int = 0,
    ):
        self.hidden_size = hidden_size
        self.code_dim = code_dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.dropout_rate = dropout_rate
        self.loss_mode = loss_mode
        self.bias_weight_mode = bias_weight_mode
        self.resample_masks_per_step = resample_masks_per_step
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            dropout_rate=self.dropout_rate,
            seed=self.seed,
            loss_mode=self.loss_mode,
            bias_weight_mode=self.bias_weight_mode,
            hidden_size=self.hidden_size,
            code_dim=self.code_dim,
            resample_masks_per_step=self.resample_masks_per_step,
        )

    def fit(self, X, y, profiles=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=int)
        if set(np.unique(y)) - {0, 1}:
            raise ValidationError("labels must be binary 0/1")
        self.model_, self.history_ = train_classifier(X, y, profiles, self._train_config())
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("EmploymentLstm is not fitted")

    def predict_proba(self, X):
        self._check_fitted()
        p = predict_proba_matrix(self.model_, X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        self._check_fitted()
        return predict_labels(self.model_, X)


__all__ = [
    "DEMOGRAPHIC_DIM",
    "EmploymentLstm",
    "ModelGradients",
    "OutputHead",
    "SequenceModel",
    "StudentSequence",
    "TrainConfig",
    "assemble_sequences",
    "bias_penalty",
    "bias_penalty_grad",
    "init_head",
    "l2_loss",
    "l2_loss_grads",
    "predict_labels",
    "predict_proba_matrix",
    "predict_sequence",
    "profile_pair_gram",
    "sequence_matrix",
    "split_features",
    "total_loss",
    "total_loss_grads",
    "train_classifier",
]
