"""Minority-class augmentation with a small adversarial generator.

A one-hidden-layer generator maps uniform noise on [-1, 1]^z_dim to the
flat feature layout (semester codes then demographics); a matching
discriminator scores real vs generated rows. Training alternates full-batch
discriminator and generator steps. The discriminator maximizes
log D(x) + log(1 - D(G(z))); the generator follows the non-saturating
surrogate (maximize log D(G(z))), while the original minimax value
function is logged per epoch. Generated rows are clipped to [0, 1] and
binary demographic slots are rounded, at generation time only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._math import dsigmoid_from_output, glorot_uniform, sigmoid
from .errors import NumericalError, ValidationError

_LOG_EPS = 1e-12


@dataclass
class MlpParams:
    """One hidden layer, logistic activations on both layers."""

    w1: np.ndarray  # (hidden, in)
    b1: np.ndarray
    w2: np.ndarray  # (out, hidden)
    b2: np.ndarray

    def copy(self) -> "MlpParams":
        return MlpParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


def _init_mlp(rng, in_dim, hidden_dim, out_dim) -> MlpParams:
    return MlpParams(
        w1=glorot_uniform(rng, hidden_dim, in_dim),
        b1=np.zeros(hidden_dim),
        w2=glorot_uniform(rng, out_dim, hidden_dim),
        b2=np.zeros(out_dim),
    )


def _mlp_forward(p: MlpParams, x):
    a1 = sigmoid(x @ p.w1.T + p.b1)
    out = sigmoid(a1 @ p.w2.T + p.b2)
    return a1, out


@dataclass
class GanConfig:
    z_dim: int = 8
    hidden_dim: int = 32
    epochs: int = 4000
    learning_rate: float = 0.3
    k_d: int = 3  # discriminator steps per generator step

    def validate(self):
        if self.z_dim < 1 or self.hidden_dim < 1:
            raise ValidationError("z_dim and hidden_dim must be >= 1")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.k_d < 1:
            raise ValidationError("k_d must be >= 1")

    def to_json(self) -> dict:
        return {
            "z_dim": self.z_dim,
            "hidden_dim": self.hidden_dim,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "k_d": self.k_d,
        }

    @classmethod
    def from_json(cls, d: dict) -> "GanConfig":
        return cls(**d)


@dataclass
class GanParams:
    generator: MlpParams
    discriminator: MlpParams
    z_dim: int
    feature_dim: int
    binary_slots: tuple = ()  # column indices rounded to {0,1} at generation

    def copy(self) -> "GanParams":
        return GanParams(
            generator=self.generator.copy(),
            discriminator=self.discriminator.copy(),
            z_dim=self.z_dim,
            feature_dim=self.feature_dim,
            binary_slots=tuple(self.binary_slots),
        )


@dataclass
class GanHistory:
    value_fn: list[float] = field(default_factory=list)  # log D(x) + log(1 - D(G(z)))
    d_accuracy: list[float] = field(default_factory=list)
    aborted_at: int | None = None  # epoch of divergence, params are pre-abort


def discriminator_output(gan: GanParams, x) -> np.ndarray:
    _, out = _mlp_forward(gan.discriminator, np.atleast_2d(np.asarray(x, dtype=float)))
    return out[:, 0]


def raw_generator_output(gan: GanParams, z) -> np.ndarray:
    _, out = _mlp_forward(gan.generator, np.atleast_2d(np.asarray(z, dtype=float)))
    return out


def minimax_value(gan: GanParams, real: np.ndarray, fake: np.ndarray) -> float:
    """Mean log D(real) + mean log(1 - D(fake))."""
    d_real = discriminator_output(gan, real)
    d_fake = discriminator_output(gan, fake)
    return float(
        np.mean(np.log(np.maximum(d_real, _LOG_EPS)))
        + np.mean(np.log(np.maximum(1.0 - d_fake, _LOG_EPS)))
    )


def _discriminator_grads(disc: MlpParams, x, target_real: bool):
    """Gradient of the discriminator's own loss -log D(x) (real) or
    -log(1 - D(x)) (fake), averaged over the batch."""
    n = x.shape[0]
    a1, out = _mlp_forward(disc, x)
    p = out[:, 0]
    # d loss / d logit2 simplifies to (p - 1) for real targets and p for fake.
    dz2 = ((p - 1.0) if target_real else p)[:, None] / n
    g_w2 = dz2.T @ a1
    g_b2 = dz2.sum(axis=0)
    da1 = dz2 @ disc.w2
    dz1 = da1 * dsigmoid_from_output(a1)
    g_w1 = dz1.T @ x
    g_b1 = dz1.sum(axis=0)
    loss = -np.mean(
        np.log(np.maximum(p if target_real else 1.0 - p, _LOG_EPS))
    )
    return float(loss), MlpParams(g_w1, g_b1, g_w2, g_b2)


def _generator_grads(gen: MlpParams, disc: MlpParams, z):
    """Gradient of the non-saturating generator loss -log D(G(z)) w.r.t.
    the generator, discriminator frozen."""
    n = z.shape[0]
    a1g, x_fake = _mlp_forward(gen, z)
    a1d, out = _mlp_forward(disc, x_fake)
    p = out[:, 0]
    dz2 = (p - 1.0)[:, None] / n  # d(-log D)/d logit2 of the discriminator
    da1d = dz2 @ disc.w2
    dz1d = da1d * dsigmoid_from_output(a1d)
    dx = dz1d @ disc.w1  # gradient arriving at the generated sample
    dzg2 = dx * dsigmoid_from_output(x_fake)
    g_w2 = dzg2.T @ a1g
    g_b2 = dzg2.sum(axis=0)
    da1g = dzg2 @ gen.w2
    dzg1 = da1g * dsigmoid_from_output(a1g)
    g_w1 = dzg1.T @ z
    g_b1 = dzg1.sum(axis=0)
    loss = -np.mean(np.log(np.maximum(p, _LOG_EPS)))
    return float(loss), MlpParams(g_w1, g_b1, g_w2, g_b2)


def _apply(params: MlpParams, grads: MlpParams, lr: float):
    params.w1 -= lr * grads.w1
    params.b1 -= lr * grads.b1
    params.w2 -= lr * grads.w2
    params.b2 -= lr * grads.b2


def gan_train(
    minority: np.ndarray,
    config: GanConfig | None = None,
    seed: int = 0,
    binary_slots: tuple = (),
) -> tuple[GanParams, GanHistory]:
    """Train generator/discriminator on the minority feature rows.

    Deterministic per seed. If an update produces non-finite values the
    last stable parameters are returned and the history records the abort
    epoch.
    """
    config = config or GanConfig()
    config.validate()
    x = np.atleast_2d(np.asarray(minority, dtype=float))
    if x.shape[0] < 2:
        raise ValidationError("need at least 2 minority samples to train the generator")
    rng = np.random.default_rng(seed)
    gan = GanParams(
        generator=_init_mlp(rng, config.z_dim, config.hidden_dim, x.shape[1]),
        discriminator=_init_mlp(rng, x.shape[1], config.hidden_dim, 1),
        z_dim=config.z_dim,
        feature_dim=x.shape[1],
        binary_slots=tuple(binary_slots),
    )
    history = GanHistory()
    n = x.shape[0]
    lr = config.learning_rate
    for epoch in range(config.epochs):
        stable = gan.copy()
        for _ in range(config.k_d):
            z = rng.uniform(-1.0, 1.0, size=(n, config.z_dim))
            fake = raw_generator_output(gan, z)
            loss_real, g_real = _discriminator_grads(gan.discriminator, x, target_real=True)
            loss_fake, g_fake = _discriminator_grads(gan.discriminator, fake, target_real=False)
            _apply(gan.discriminator, g_real, lr)
            _apply(gan.discriminator, g_fake, lr)
        z = rng.uniform(-1.0, 1.0, size=(n, config.z_dim))
        loss_g, g_gen = _generator_grads(gan.generator, gan.discriminator, z)
        _apply(gan.generator, g_gen, lr)

        fake_eval = raw_generator_output(gan, z)
        value = minimax_value(gan, x, fake_eval)
        d_real = discriminator_output(gan, x)
        d_fake = discriminator_output(gan, fake_eval)
        accuracy = 0.5 * (float(np.mean(d_real > 0.5)) + float(np.mean(d_fake <= 0.5)))
        if not (np.isfinite(value) and np.isfinite(loss_g) and np.isfinite(loss_real + loss_fake)):
            history.aborted_at = epoch
            return stable, history
        history.value_fn.append(value)
        history.d_accuracy.append(accuracy)
    return gan, history


def generate(gan: GanParams, count: int, seed: int = 0) -> np.ndarray:
    """Draw ``count`` feature rows; deterministic per seed. Outputs are
    clipped to [0, 1] and the binary demographic slots rounded to {0, 1}."""
    if count < 0:
        raise ValidationError("count must be >= 0")
    if count == 0:
        return np.zeros((0, gan.feature_dim))
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1.0, 1.0, size=(count, gan.z_dim))
    out = np.clip(raw_generator_output(gan, z), 0.0, 1.0)
    for j in gan.binary_slots:
        out[:, j] = np.round(out[:, j])
    return out


@dataclass
class AugmentedSet:
    """Real rows plus generated minority rows; real data is never touched."""

    x_real: np.ndarray
    y_real: np.ndarray
    x_synthetic: np.ndarray
    y_synthetic: np.ndarray
    minority_label: int

    @property
    def x(self) -> np.ndarray:
        return np.concatenate([self.x_real, self.x_synthetic], axis=0)

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.y_real, self.y_synthetic])

    @property
    def synthetic_flags(self) -> np.ndarray:
        return np.concatenate(
            [np.zeros(len(self.y_real), dtype=int), np.ones(len(self.y_synthetic), dtype=int)]
        )


def balance(x: np.ndarray, y: np.ndarray, gan: GanParams, seed: int = 0) -> AugmentedSet:
    """Append generated minority rows until both classes have equal counts.

    The minority class is the label with the smaller count; an already
    balanced set passes through with zero synthetic rows."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=int)
    if y.shape != (x.shape[0],):
        raise ValidationError("labels do not match feature rows")
    counts = {label: int(np.sum(y == label)) for label in (0, 1)}
    minority = 0 if counts[0] <= counts[1] else 1
    deficit = abs(counts[0] - counts[1])
    synth = generate(gan, deficit, seed)
    return AugmentedSet(
        x_real=x,
        y_real=y,
        x_synthetic=synth,
        y_synthetic=np.full(deficit, minority, dtype=int),
        minority_label=minority,
    )


class MinorityGan(BaseEstimator):
    """Sklearn-style wrapper: fit on minority feature rows, then sample."""

    def __init__(
        self,
        z_dim: int = 8,
        hidden_dim: int = 32,
        epochs: int = 4000,
        learning_rate: float = 0.3,
        k_d: int = 3,
        binary_slots: tuple = (),
        seed: int = 0,
    ):
        self.z_dim = z_dim
        self.hidden_dim = hidden_dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.k_d = k_d
        self.binary_slots = binary_slots
        self.seed = seed

    def fit(self, X, y=None):
        config = GanConfig(
            z_dim=self.z_dim,
            hidden_dim=self.hidden_dim,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            k_d=self.k_d,
        )
        self.params_, self.history_ = gan_train(
            X, config, seed=self.seed, binary_slots=tuple(self.binary_slots)
        )
        return self

    def sample(self, count: int, seed: int = 0) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise NotFittedError("MinorityGan is not fitted")
        return generate(self.params_, count, seed)


__all__ = [
    "AugmentedSet",
    "GanConfig",
    "GanHistory",
    "GanParams",
    "MinorityGan",
    "MlpParams",
    "balance",
    "discriminator_output",
    "gan_train",
    "generate",
    "minimax_value",
    "raw_generator_output",
]
