"""End-to-end pipeline: embed grades, profile bias, augment, train, predict.

A fitted pipeline is captured in a ModelBundle: the six semester encoders
(with their course columns), the generator/discriminator pair, the LSTM and
output head, the per-major bias profiles, configuration, seeds, and the
training history. Bundles serialize to a single JSON checkpoint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .autoencoder import (
    AcademicEmbedding,
    AutoencoderParams,
    SemesterEmbedding,
    embed_semesters,
    encode_cohort_with,
)
from .bias import BiasProfile, bias_profiles
from .classifier import (
    DEMOGRAPHIC_DIM,
    SequenceModel,
    TrainConfig,
    assemble_sequences,
    OutputHead,
    predict_proba_matrix,
    sequence_matrix,
    train_classifier,
)
from .cohort import NUM_SEMESTERS, Cohort
from .errors import ValidationError
from .gan import AugmentedSet, GanConfig, GanParams, MlpParams, balance, gan_train
from .lstm import params_from_json, params_to_json

# Deterministic sub-seed offsets for pipeline stages.
_SEED_EMBED = 1
_SEED_GAN = 2
_SEED_BALANCE = 3


@dataclass
class AeConfig:
    code_dim: int = 3
    hidden_dims: tuple = (64,)
    epochs: int = 200
    learning_rate: float = 1.0

    def to_json(self) -> dict:
        return {
            "code_dim": self.code_dim,
            "hidden_dims": list(self.hidden_dims),
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
        }

    @classmethod
    def from_json(cls, d: dict) -> "AeConfig":
        d = dict(d)
        d["hidden_dims"] = tuple(d.get("hidden_dims", (64,)))
        return cls(**d)


@dataclass
class PipelineConfig:
    ae: AeConfig = field(default_factory=AeConfig)
    gan: GanConfig = field(default_factory=GanConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    num_semesters: int = NUM_SEMESTERS
    use_gan: bool = True
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "ae": self.ae.to_json(),
            "gan": self.gan.to_json(),
            "train": self.train.to_json(),
            "num_semesters": self.num_semesters,
            "use_gan": self.use_gan,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PipelineConfig":
        return cls(
            ae=AeConfig.from_json(d.get("ae", {})),
            gan=GanConfig.from_json(d.get("gan", {})),
            train=TrainConfig.from_json(d.get("train", {})),
            num_semesters=d.get("num_semesters", NUM_SEMESTERS),
            use_gan=d.get("use_gan", True),
            seed=d.get("seed", 0),
        )


@dataclass
class ModelBundle:
    embedding: AcademicEmbedding  # params + course columns; codes are fit-data
    gan: GanParams | None
    model: SequenceModel
    profiles: list[BiasProfile]
    config: PipelineConfig
    history: list[float]


def cohort_features(cohort: Cohort, embedding: AcademicEmbedding, num_semesters: int):
    """Flat feature matrix, labels, and student ids for a cohort."""
    sequences = assemble_sequences(cohort, embedding, num_semesters)
    x, y = sequence_matrix(sequences)
    ids = [s.student_id for s in sequences]
    return x, y, ids


def augment_features(x, y, gan_config: GanConfig, seed: int) -> tuple[AugmentedSet, GanParams | None]:
    """Train the generator on the minority rows and balance the set.

    An already balanced set passes through untouched (no generator)."""
    y = np.asarray(y, dtype=int)
    counts = {c: int(np.sum(y == c)) for c in (0, 1)}
    minority = 0 if counts[0] <= counts[1] else 1
    if counts[0] == counts[1]:
        empty = np.zeros((0, x.shape[1]))
        return (
            AugmentedSet(
                x_real=np.asarray(x, dtype=float),
                y_real=y,
                x_synthetic=empty,
                y_synthetic=np.zeros(0, dtype=int),
                minority_label=minority,
            ),
            None,
        )
    binary_slots = tuple(range(x.shape[1] - DEMOGRAPHIC_DIM, x.shape[1]))
    gan, _history = gan_train(
        np.asarray(x, dtype=float)[y == minority],
        gan_config,
        seed=seed,
        binary_slots=binary_slots,
    )
    return balance(x, y, gan, seed=seed + _SEED_BALANCE), gan


def fit_pipeline(cohort: Cohort, config: PipelineConfig | None = None) -> ModelBundle:
    """Fit every stage on a training cohort.

    Bias profiles are computed on the cohort before augmentation, so
    generated rows never alter the measured bias.
    """
    config = config or PipelineConfig()
    if not (1 <= config.num_semesters <= NUM_SEMESTERS):
        raise ValidationError(f"num_semesters {config.num_semesters} outside [1, {NUM_SEMESTERS}]")
    embedding = embed_semesters(
        cohort,
        code_dim=config.ae.code_dim,
        hidden_dims=config.ae.hidden_dims,
        epochs=config.ae.epochs,
        learning_rate=config.ae.learning_rate,
        seed=config.seed + _SEED_EMBED,
    )
    profiles = bias_profiles(cohort, config.train.bias_weight_mode)
    x, y, _ids = cohort_features(cohort, embedding, config.num_semesters)
    gan = None
    if config.use_gan:
        augmented, gan = augment_features(x, y, config.gan, seed=config.seed + _SEED_GAN)
        x_train, y_train = augmented.x, augmented.y
    else:
        x_train, y_train = x, y
    train_cfg = TrainConfig(**{**config.train.to_json(), "code_dim": config.ae.code_dim})
    train_cfg.seed = config.seed
    model, history = train_classifier(x_train, y_train, profiles, train_cfg)
    return ModelBundle(
        embedding=embedding,
        gan=gan,
        model=model,
        profiles=profiles,
        config=config,
        history=history,
    )


def predict_cohort(bundle: ModelBundle, cohort: Cohort):
    """Per-student employment probabilities and labels for a (new) cohort.

    Grade rows are encoded with the bundle's semester encoders, aligned to
    the course columns seen at fit time."""
    embedding = encode_cohort_with(bundle.embedding, cohort)
    x, y, ids = cohort_features(cohort, embedding, bundle.config.num_semesters)
    probs = predict_proba_matrix(bundle.model, x)
    labels = (probs >= 0.5).astype(int)
    return ids, probs, labels, y


# ---------------------------------------------------------------------------
# checkpoint serialization

_BUNDLE_FORMAT = "jobseq-bundle-v1"


def _ae_to_json(emb: SemesterEmbedding) -> dict:
    return {
        "semester": emb.semester,
        "layer_dims": list(emb.params.layer_dims),
        "weights": [w.tolist() for w in emb.params.weights],
        "biases": [b.tolist() for b in emb.params.biases],
        "activation": emb.params.activation,
        "col_index": list(emb.col_index),
        "zero_code": emb.zero_code.tolist(),
    }


def _ae_from_json(d: dict) -> SemesterEmbedding:
    params = AutoencoderParams(
        layer_dims=list(d["layer_dims"]),
        weights=[np.asarray(w, dtype=float) for w in d["weights"]],
        biases=[np.asarray(b, dtype=float) for b in d["biases"]],
        activation=d.get("activation", "sigmoid"),
    )
    code_dim = params.code_dim
    return SemesterEmbedding(
        semester=d["semester"],
        params=params,
        row_index=[],
        col_index=list(d["col_index"]),
        codes=np.zeros((0, code_dim)),
        zero_code=np.asarray(d["zero_code"], dtype=float),
    )


def _mlp_to_json(p: MlpParams) -> dict:
    return {
        "w1": p.w1.tolist(),
        "b1": p.b1.tolist(),
        "w2": p.w2.tolist(),
        "b2": p.b2.tolist(),
    }


def _mlp_from_json(d: dict) -> MlpParams:
    return MlpParams(
        w1=np.asarray(d["w1"], dtype=float),
        b1=np.asarray(d["b1"], dtype=float),
        w2=np.asarray(d["w2"], dtype=float),
        b2=np.asarray(d["b2"], dtype=float),
    )


def save_bundle(bundle: ModelBundle, path) -> None:
    doc = {
        "format": _BUNDLE_FORMAT,
        "config": bundle.config.to_json(),
        "autoencoders": [_ae_to_json(e) for e in bundle.embedding.semesters],
        "code_dim": bundle.embedding.code_dim,
        "gan": None
        if bundle.gan is None
        else {
            "generator": _mlp_to_json(bundle.gan.generator),
            "discriminator": _mlp_to_json(bundle.gan.discriminator),
            "z_dim": bundle.gan.z_dim,
            "feature_dim": bundle.gan.feature_dim,
            "binary_slots": list(bundle.gan.binary_slots),
        },
        "lstm": params_to_json(bundle.model.lstm),
        "head": {
            "w": bundle.model.head.w.tolist(),
            "b": bundle.model.head.b,
            "hidden_size": bundle.model.head.hidden_size,
        },
        "num_semesters": bundle.model.num_semesters,
        "profiles": [
            {
                "major_id": p.major_id,
                "p_values": p.p_values.tolist(),
                "u": p.u.tolist(),
                "degenerate": list(p.degenerate),
            }
            for p in bundle.profiles
        ],
        "history": list(bundle.history),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_bundle(path) -> ModelBundle:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _BUNDLE_FORMAT:
        raise ValidationError(f"unrecognized checkpoint format {doc.get('format')!r}")
    config = PipelineConfig.from_json(doc["config"])
    semesters = [_ae_from_json(d) for d in doc["autoencoders"]]
    gan = None
    if doc["gan"] is not None:
        g = doc["gan"]
        gan = GanParams(
            generator=_mlp_from_json(g["generator"]),
            discriminator=_mlp_from_json(g["discriminator"]),
            z_dim=g["z_dim"],
            feature_dim=g["feature_dim"],
            binary_slots=tuple(g["binary_slots"]),
        )
    head = OutputHead(
        w=np.asarray(doc["head"]["w"], dtype=float),
        b=float(doc["head"]["b"]),
        hidden_size=int(doc["head"]["hidden_size"]),
    )
    model = SequenceModel(
        lstm=params_from_json(doc["lstm"]),
        head=head,
        code_dim=doc["code_dim"],
        num_semesters=doc["num_semesters"],
    )
    profiles = [
        BiasProfile(
            major_id=p["major_id"],
            p_values=np.asarray(p["p_values"], dtype=float),
            u=np.asarray(p["u"], dtype=float),
            degenerate=tuple(bool(b) for b in p["degenerate"]),
        )
        for p in doc["profiles"]
    ]
    return ModelBundle(
        embedding=AcademicEmbedding(semesters=semesters, code_dim=doc["code_dim"]),
        gan=gan,
        model=model,
        profiles=profiles,
        config=config,
        history=list(doc["history"]),
    )


__all__ = [
    "AeConfig",
    "ModelBundle",
    "PipelineConfig",
    "augment_features",
    "cohort_features",
    "fit_pipeline",
    "load_bundle",
    "predict_cohort",
    "save_bundle",
]
