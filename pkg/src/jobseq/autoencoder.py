"""Per-semester grade matrices and their autoencoder embeddings.

Each semester's scores form a sparse students x courses matrix (zero means
the student did not take the course). A small fully-connected autoencoder
with logistic activations, trained by full-batch gradient descent on the
mean squared reconstruction error, compresses every grade row to a dense
code vector. One autoencoder is trained per semester.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._math import dsigmoid_from_output, glorot_uniform, sigmoid
from .cohort import NUM_SEMESTERS, SCORE_MAX, Cohort
from .errors import NumericalError, ValidationError

# activation name -> (function, derivative expressed via the output value)
ACTIVATIONS = {
    "sigmoid": (sigmoid, dsigmoid_from_output),
    "tanh": (np.tanh, lambda a: 1.0 - a**2),
    "linear": (lambda x: x, lambda a: np.ones_like(a)),
}


@dataclass
class GradeMatrix:
    """Dense view of one semester's scores; 0 marks 'not enrolled'."""

    semester: int
    values: np.ndarray  # (n_students, n_courses)
    row_index: list[str]  # student_id per row
    col_index: list[str]  # course_id per column

    def __post_init__(self):
        if self.values.shape != (len(self.row_index), len(self.col_index)):
            raise ValidationError("grade matrix shape does not match its indices")

    @property
    def is_empty(self) -> bool:
        return self.values.shape[1] == 0


def build_c_matrix(cohort: Cohort, semester: int) -> GradeMatrix:
    """Assemble the semester's students x courses score matrix.

    Rows cover the students with at least one grade that semester, columns
    the courses taught; both are sorted by id so construction is
    deterministic. Duplicate (student, course) grade rows are rejected.
    """
    if not (1 <= semester <= NUM_SEMESTERS):
        raise ValidationError(f"semester {semester} outside [1, {NUM_SEMESTERS}]")
    rows = [g for g in cohort.grades if g.semester == semester]
    students = sorted({g.student_id for g in rows})
    courses = sorted({g.course_id for g in rows})
    row_of = {s: i for i, s in enumerate(students)}
    col_of = {c: j for j, c in enumerate(courses)}
    values = np.zeros((len(students), len(courses)))
    seen = set()
    for g in rows:
        key = (g.student_id, g.course_id)
        if key in seen:
            raise ValidationError(
                f"duplicate grade for student {g.student_id}, course {g.course_id}, semester {semester}"
            )
        seen.add(key)
        values[row_of[g.student_id], col_of[g.course_id]] = g.score
    return GradeMatrix(semester=semester, values=values, row_index=students, col_index=courses)


@dataclass
class AutoencoderParams:
    """Symmetric encoder/decoder stack; layer_dims runs input..code..input."""

    layer_dims: list[int]
    weights: list[np.ndarray]  # weights[i]: (layer_dims[i+1], layer_dims[i])
    biases: list[np.ndarray]
    activation: str = "sigmoid"

    @property
    def code_layer(self) -> int:
        return (len(self.layer_dims) - 1) // 2

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def code_dim(self) -> int:
        return self.layer_dims[self.code_layer]


def full_layer_dims(input_dim: int, encoder_dims: list[int]) -> list[int]:
    """[input, *encoder_dims, *mirrored hidden dims, input]."""
    if not encoder_dims or any(d < 1 for d in encoder_dims):
        raise ValidationError(f"bad encoder dims {encoder_dims!r}")
    return [input_dim, *encoder_dims, *encoder_dims[-2::-1], input_dim]


def init_autoencoder(
    input_dim: int, encoder_dims: list[int], seed: int, activation: str = "sigmoid"
) -> AutoencoderParams:
    if activation not in ACTIVATIONS:
        raise ValidationError(f"unknown activation {activation!r}; expected {tuple(ACTIVATIONS)}")
    dims = full_layer_dims(input_dim, encoder_dims)
    rng = np.random.default_rng(seed)
    weights = [glorot_uniform(rng, dims[i + 1], dims[i]) for i in range(len(dims) - 1)]
    biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    return AutoencoderParams(layer_dims=dims, weights=weights, biases=biases, activation=activation)


def ae_forward(params: AutoencoderParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Run the stack on a vector or row matrix; returns (code, reconstruction)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.input_dim:
        raise ValidationError(
            f"input has {x.shape[-1]} features, autoencoder expects {params.input_dim}"
        )
    act, _ = ACTIVATIONS[params.activation]
    h = x
    code = None
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = act(h @ w.T + b)
        if i + 1 == params.code_layer:
            code = h
    return code, h


def _ae_activations(params: AutoencoderParams, x: np.ndarray) -> list[np.ndarray]:
    act, _ = ACTIVATIONS[params.activation]
    acts = [x]
    h = x
    for w, b in zip(params.weights, params.biases):
        h = act(h @ w.T + b)
        acts.append(h)
    return acts


def ae_loss(params: AutoencoderParams, x: np.ndarray) -> float:
    """Mean squared reconstruction error over all matrix entries."""
    _, recon = ae_forward(params, x)
    return float(np.mean((recon - x) ** 2))


def ae_gradients(params: AutoencoderParams, x: np.ndarray):
    """Analytic gradients of ae_loss; returns (loss, weight grads, bias grads)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    _, dact = ACTIVATIONS[params.activation]
    acts = _ae_activations(params, x)
    recon = acts[-1]
    loss = float(np.mean((recon - x) ** 2))
    delta = 2.0 * (recon - x) / recon.size  # d loss / d recon
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    for i in range(len(params.weights) - 1, -1, -1):
        dz = delta * dact(acts[i + 1])
        grads_w[i] = dz.T @ acts[i]
        grads_b[i] = dz.sum(axis=0)
        delta = dz @ params.weights[i]
    return loss, grads_w, grads_b


def ae_train(
    x: np.ndarray,
    encoder_dims: list[int],
    epochs: int,
    learning_rate: float,
    seed: int,
    activation: str = "sigmoid",
) -> tuple[AutoencoderParams, list[float]]:
    """Full-batch gradient descent; x rows are expected in [0, 1].

    Returns trained params and the per-epoch loss history (length = epochs,
    each entry the loss before that epoch's update)."""
    if epochs < 1:
        raise ValidationError("epochs must be >= 1")
    if learning_rate < 0:
        raise ValidationError("learning_rate must be >= 0")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    params = init_autoencoder(x.shape[1], list(encoder_dims), seed, activation)
    history = []
    for epoch in range(epochs):
        loss, grads_w, grads_b = ae_gradients(params, x)
        if not np.isfinite(loss):
            raise NumericalError(
                f"autoencoder loss became non-finite at epoch {epoch} (lr={learning_rate})"
            )
        history.append(loss)
        for i in range(len(params.weights)):
            params.weights[i] -= learning_rate * grads_w[i]
            params.biases[i] -= learning_rate * grads_b[i]
    return params, history


class GradeAutoencoder(BaseEstimator, TransformerMixin):
    """Sklearn-style wrapper: fit on a score matrix, transform rows to codes.

    Scores are divided by ``score_scale`` before encoding so the logistic
    units operate in [0, 1].
    """

    def __init__(
        self,
        code_dim: int = 3,
        hidden_dims: tuple = (64,),
        epochs: int = 200,
        learning_rate: float = 1.0,
        score_scale: float = SCORE_MAX,
        seed: int = 0,
    ):
        self.code_dim = code_dim
        self.hidden_dims = hidden_dims
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.score_scale = score_scale
        self.seed = seed

    def _encoder_dims(self):
        return [*self.hidden_dims, self.code_dim]

    def fit(self, X, y=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        self.n_features_in_ = X.shape[1]
        self.params_, self.loss_history_ = ae_train(
            X / self.score_scale,
            self._encoder_dims(),
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            seed=self.seed,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError("GradeAutoencoder is not fitted")

    def transform(self, X):
        self._check_fitted()
        code, _ = ae_forward(self.params_, np.asarray(X, dtype=float) / self.score_scale)
        return code

    def reconstruct(self, X):
        self._check_fitted()
        _, recon = ae_forward(self.params_, np.asarray(X, dtype=float) / self.score_scale)
        return recon * self.score_scale


@dataclass
class SemesterEmbedding:
    """Trained encoder state for one semester."""

    semester: int
    params: AutoencoderParams
    row_index: list[str]
    col_index: list[str]
    codes: np.ndarray  # (n_students, code_dim), rows follow row_index
    zero_code: np.ndarray  # encoding of an all-zero grade row
    loss_history: list[float] = field(default_factory=list)

    def row_map(self) -> dict[str, int]:
        if not hasattr(self, "_row_map"):
            self._row_map = {s: i for i, s in enumerate(self.row_index)}
        return self._row_map


@dataclass
class AcademicEmbedding:
    """Per-semester code matrices plus lookup for absent students."""

    semesters: list[SemesterEmbedding]
    code_dim: int

    def vector_for(self, student_id: str, semester: int) -> np.ndarray:
        emb = self.semesters[semester - 1]
        row = emb.row_map().get(student_id)
        return emb.zero_code if row is None else emb.codes[row]


def embed_semesters(
    cohort: Cohort,
    code_dim: int = 3,
    hidden_dims: tuple = (64,),
    epochs: int = 200,
    learning_rate: float = 1.0,
    seed: int = 0,
) -> AcademicEmbedding:
    """Train one autoencoder per semester and encode every grade row.

    Students without grades in a semester are later looked up as the
    encoding of the all-zero row. A semester with no courses at all yields
    zero codes (degenerate, kept so sequences stay six steps long).
    """
    semesters = []
    for semester in range(1, NUM_SEMESTERS + 1):
        matrix = build_c_matrix(cohort, semester)
        if matrix.is_empty:
            semesters.append(
                SemesterEmbedding(
                    semester=semester,
                    params=init_autoencoder(1, [code_dim], seed),
                    row_index=matrix.row_index,
                    col_index=matrix.col_index,
                    codes=np.zeros((len(matrix.row_index), code_dim)),
                    zero_code=np.zeros(code_dim),
                )
            )
            continue
        scaled = matrix.values / SCORE_MAX
        params, history = ae_train(
            scaled,
            [*hidden_dims, code_dim],
            epochs=epochs,
            learning_rate=learning_rate,
            seed=seed + semester,
        )
        codes, _ = ae_forward(params, scaled)
        zero_code, _ = ae_forward(params, np.zeros(matrix.values.shape[1]))
        semesters.append(
            SemesterEmbedding(
                semester=semester,
                params=params,
                row_index=matrix.row_index,
                col_index=matrix.col_index,
                codes=codes,
                zero_code=zero_code,
                loss_history=history,
            )
        )
    return AcademicEmbedding(semesters=semesters, code_dim=code_dim)


def encode_cohort_with(embedding: AcademicEmbedding, cohort: Cohort) -> AcademicEmbedding:
    """Encode a (possibly new) cohort with already-trained semester encoders.

    Grade rows are aligned to each encoder's stored course columns; courses
    unseen at fit time are dropped, missing ones stay 0.
    """
    semesters = []
    for emb in embedding.semesters:
        semester = emb.semester
        students = sorted({g.student_id for g in cohort.grades if g.semester == semester})
        col_of = {c: j for j, c in enumerate(emb.col_index)}
        row_of = {s: i for i, s in enumerate(students)}
        values = np.zeros((len(students), len(emb.col_index)))
        for g in cohort.grades:
            if g.semester == semester and g.course_id in col_of:
                values[row_of[g.student_id], col_of[g.course_id]] = g.score
        if values.shape[1] == 0:
            codes = np.zeros((len(students), embedding.code_dim))
        else:
            codes, _ = ae_forward(emb.params, values / SCORE_MAX)
        semesters.append(
            SemesterEmbedding(
                semester=semester,
                params=emb.params,
                row_index=students,
                col_index=emb.col_index,
                codes=codes,
                zero_code=emb.zero_code,
            )
        )
    return AcademicEmbedding(semesters=semesters, code_dim=embedding.code_dim)


__all__ = [
    "AcademicEmbedding",
    "AutoencoderParams",
    "GradeAutoencoder",
    "GradeMatrix",
    "SemesterEmbedding",
    "ae_forward",
    "ae_gradients",
    "ae_loss",
    "ae_train",
    "build_c_matrix",
    "embed_semesters",
    "encode_cohort_with",
    "init_autoencoder",
]
