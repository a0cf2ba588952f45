"""Seeded experiment harness emitting plot-ready tables.

Each experiment draws a fresh synthetic cohort per seed, splits it by
stratified sampling, fits the pipeline stages on the training side only,
and always evaluates on the untouched test side. Every emitted number is
fully determined by (spec, seeds).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from math import comb
from pathlib import Path

import numpy as np

from .autoencoder import ae_train, build_c_matrix, embed_semesters, encode_cohort_with
from .bias import bias_profiles
from .classifier import TrainConfig, predict_labels, train_classifier
from .cohort import NUM_SEMESTERS, SCORE_MAX, SynthConfig, stratified_split, synth_cohort, uniform_bias_spec
from .errors import ValidationError
from .gan import GanConfig
from .metrics import compute_metrics
from .pipeline import AeConfig, PipelineConfig, augment_features, cohort_features

EXPERIMENT_KINDS = (
    "variants",
    "semester_ablation",
    "dropout_sweep",
    "lr_sweep",
    "embed_dim_sweep",
    "optimization_compare",
)

DROPOUT_GRID = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
LR_GRID = (0.001, 0.005, 0.01, 0.05, 0.1)
EMBED_DIM_GRID = (3, 6, 12, 24, 32, 64, 80, 96)

METRIC_KEYS = ("accuracy", "macro_precision", "macro_recall", "macro_f1")


def default_experiment_synth(
    num_students: int = 2000, num_majors: int = 20, seed: int = 0
) -> SynthConfig:
    """Imbalanced cohort (about 10:1) with the same two demographic biases
    planted in every major, so cross-major bias profiles agree on the
    informative aspects."""
    return SynthConfig(
        num_students=num_students,
        num_majors=num_majors,
        num_colleges=5,
        courses_per_semester=15,
        enrollment_density=0.85,
        base_employment_rate=0.83,
        planted_bias_spec=uniform_bias_spec(num_majors, [("gender", 2.2), ("nation", 1.8)]),
        ability_effect=2.0,
        seed=seed,
    )


def default_experiment_pipeline() -> PipelineConfig:
    return PipelineConfig(
        ae=AeConfig(code_dim=3, hidden_dims=(64,), epochs=150, learning_rate=1.0),
        gan=GanConfig(),
        train=TrainConfig(),
        num_semesters=NUM_SEMESTERS,
        use_gan=True,
        seed=0,
    )


@dataclass
class ExperimentSpec:
    kind: str
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    synth: SynthConfig = field(default_factory=default_experiment_synth)
    pipeline: PipelineConfig = field(default_factory=default_experiment_pipeline)
    test_fraction: float = 0.2
    out_dir: str | None = None
    dropout_grid: tuple = DROPOUT_GRID
    lr_grid: tuple = LR_GRID
    embed_dim_grid: tuple = EMBED_DIM_GRID

    def validate(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}; expected {EXPERIMENT_KINDS}")
        if not self.seeds:
            raise ValidationError("at least one seed is required")


@dataclass
class _SeedData:
    """Everything one seed's runs share."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    profiles: list
    x_aug: np.ndarray | None = None
    y_aug: np.ndarray | None = None


def _prepare_seed(spec: ExperimentSpec, seed: int, num_semesters: int, with_gan: bool) -> _SeedData:
    cohort = synth_cohort(replace(spec.synth, seed=seed))
    train_c, test_c = stratified_split(cohort, spec.test_fraction, seed)
    ae = spec.pipeline.ae
    embedding = embed_semesters(
        train_c,
        code_dim=ae.code_dim,
        hidden_dims=ae.hidden_dims,
        epochs=ae.epochs,
        learning_rate=ae.learning_rate,
        seed=seed + 1,
    )
    profiles = bias_profiles(train_c, spec.pipeline.train.bias_weight_mode)
    x_train, y_train, _ = cohort_features(train_c, embedding, num_semesters)
    test_embedding = encode_cohort_with(embedding, test_c)
    x_test, y_test, _ = cohort_features(test_c, test_embedding, num_semesters)
    data = _SeedData(
        x_train=x_train, y_train=y_train, x_test=x_test, y_test=y_test, profiles=profiles
    )
    if with_gan:
        augmented, _gan = augment_features(x_train, y_train, spec.pipeline.gan, seed=seed + 2)
        data.x_aug, data.y_aug = augmented.x, augmented.y
    return data


def _train_and_score(data: _SeedData, config: TrainConfig, augmented: bool) -> dict:
    x = data.x_aug if augmented else data.x_train
    y = data.y_aug if augmented else data.y_train
    model, _history = train_classifier(x, y, data.profiles, config)
    report = compute_metrics(predict_labels(model, data.x_test), data.y_test)
    return {k: getattr(report, k) for k in METRIC_KEYS}


def _aggregate(rows_per_seed: list[dict]) -> dict:
    out = {}
    for key in METRIC_KEYS:
        values = np.array([r[key] for r in rows_per_seed])
        out[f"{key}_mean"] = float(values.mean())
        out[f"{key}_std"] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return out


def _variant_config(spec: ExperimentSpec, seed: int, dropout: float, loss_mode: str) -> TrainConfig:
    base = spec.pipeline.train
    return replace(
        base,
        seed=seed,
        dropout_rate=dropout,
        loss_mode=loss_mode,
        code_dim=spec.pipeline.ae.code_dim,
    )


# ---------------------------------------------------------------------------
# experiment kinds

VARIANT_LADDER = (
    # name, use_gan, use_dropout, loss_mode; each row toggles one component
    ("lstm_raw", False, False, "l2"),
    ("lstm_gan", True, False, "l2"),
    ("lstm_dropout_gan", True, True, "l2"),
    ("lstm_dropout_gan_bias_loss", True, True, "bias_reg"),
)


def run_variants(spec: ExperimentSpec) -> list[dict]:
    """Four-step component ladder, metrics averaged over seeds."""
    spec.validate()
    per_variant: dict[str, list[dict]] = {name: [] for name, *_ in VARIANT_LADDER}
    per_seed_rows = []
    for seed in spec.seeds:
        data = _prepare_seed(spec, seed, spec.pipeline.num_semesters, with_gan=True)
        for name, use_gan, use_dropout, loss_mode in VARIANT_LADDER:
            dropout = spec.pipeline.train.dropout_rate if use_dropout else 0.0
            config = _variant_config(spec, seed, dropout, loss_mode)
            scores = _train_and_score(data, config, augmented=use_gan)
            per_variant[name].append(scores)
            per_seed_rows.append({"variant": name, "seed": seed, **scores})
    rows = [
        {"variant": name, **_aggregate(per_variant[name])} for name, *_ in VARIANT_LADDER
    ]
    _emit(spec, "variants", rows, per_seed_rows)
    return rows


def run_semester_ablation(spec: ExperimentSpec) -> list[dict]:
    """Training-horizon ablation over 1..6 semesters."""
    spec.validate()
    per_ns: dict[int, list[dict]] = {ns: [] for ns in range(1, NUM_SEMESTERS + 1)}
    per_seed_rows = []
    for seed in spec.seeds:
        cohort = synth_cohort(replace(spec.synth, seed=seed))
        train_c, test_c = stratified_split(cohort, spec.test_fraction, seed)
        ae = spec.pipeline.ae
        embedding = embed_semesters(
            train_c,
            code_dim=ae.code_dim,
            hidden_dims=ae.hidden_dims,
            epochs=ae.epochs,
            learning_rate=ae.learning_rate,
            seed=seed + 1,
        )
        profiles = bias_profiles(train_c, spec.pipeline.train.bias_weight_mode)
        test_embedding = encode_cohort_with(embedding, test_c)
        for ns in range(1, NUM_SEMESTERS + 1):
            x_train, y_train, _ = cohort_features(train_c, embedding, ns)
            x_test, y_test, _ = cohort_features(test_c, test_embedding, ns)
            augmented, _ = augment_features(x_train, y_train, spec.pipeline.gan, seed=seed + 2)
            config = _variant_config(
                spec, seed, spec.pipeline.train.dropout_rate, spec.pipeline.train.loss_mode
            )
            model, _hist = train_classifier(augmented.x, augmented.y, profiles, config)
            report = compute_metrics(predict_labels(model, x_test), y_test)
            scores = {k: getattr(report, k) for k in METRIC_KEYS}
            per_ns[ns].append(scores)
            per_seed_rows.append({"semesters": ns, "seed": seed, **scores})
    rows = [{"semesters": ns, **_aggregate(per_ns[ns])} for ns in sorted(per_ns)]
    _emit(spec, "semester_ablation", rows, per_seed_rows)
    return rows


def run_dropout_sweep(spec: ExperimentSpec) -> list[dict]:
    spec.validate()
    rows, per_seed_rows = _sweep(
        spec,
        spec.dropout_grid,
        "dropout_rate",
        lambda seed, value: _variant_config(spec, seed, value, spec.pipeline.train.loss_mode),
    )
    _emit(spec, "dropout_sweep", rows, per_seed_rows)
    return rows


def run_lr_sweep(spec: ExperimentSpec) -> list[dict]:
    spec.validate()

    def config_for(seed, value):
        cfg = _variant_config(
            spec, seed, spec.pipeline.train.dropout_rate, spec.pipeline.train.loss_mode
        )
        return replace(cfg, learning_rate=value)

    rows, per_seed_rows = _sweep(spec, spec.lr_grid, "learning_rate", config_for)
    _emit(spec, "lr_sweep", rows, per_seed_rows)
    return rows


def _sweep(spec: ExperimentSpec, grid, column: str, config_for) -> tuple[list[dict], list[dict]]:
    per_value: dict = {v: [] for v in grid}
    per_seed_rows = []
    for seed in spec.seeds:
        data = _prepare_seed(spec, seed, spec.pipeline.num_semesters, with_gan=True)
        for value in grid:
            scores = _train_and_score(data, config_for(seed, value), augmented=True)
            per_value[value].append(scores)
            per_seed_rows.append({column: value, "seed": seed, **scores})
    rows = [{column: v, **_aggregate(per_value[v])} for v in grid]
    return rows, per_seed_rows


def run_embed_dim_sweep(spec: ExperimentSpec) -> list[dict]:
    """Final reconstruction loss of the semester encoders per code size."""
    spec.validate()
    per_dim: dict[int, list[float]] = {k: [] for k in spec.embed_dim_grid}
    per_seed_rows = []
    for seed in spec.seeds:
        cohort = synth_cohort(replace(spec.synth, seed=seed))
        matrices = [build_c_matrix(cohort, s) for s in range(1, NUM_SEMESTERS + 1)]
        for dim in spec.embed_dim_grid:
            losses = []
            for matrix in matrices:
                if matrix.is_empty:
                    continue
                _, history = ae_train(
                    matrix.values / SCORE_MAX,
                    [*spec.pipeline.ae.hidden_dims, dim],
                    epochs=spec.pipeline.ae.epochs,
                    learning_rate=spec.pipeline.ae.learning_rate,
                    seed=seed + matrix.semester,
                )
                losses.append(history[-1])
            value = float(np.mean(losses))
            per_dim[dim].append(value)
            per_seed_rows.append({"code_dim": dim, "seed": seed, "reconstruction_loss": value})
    rows = [
        {
            "code_dim": dim,
            "reconstruction_loss_mean": float(np.mean(per_dim[dim])),
            "reconstruction_loss_std": float(np.std(per_dim[dim], ddof=1)) if len(per_dim[dim]) > 1 else 0.0,
        }
        for dim in spec.embed_dim_grid
    ]
    _emit(spec, "embed_dim_sweep", rows, per_seed_rows)
    return rows


def sign_test_p(deltas) -> float:
    """One-sided sign test: P(#positives >= observed | fair coin), zeros dropped."""
    deltas = [d for d in deltas if d != 0]
    n = len(deltas)
    if n == 0:
        return 1.0
    k = sum(1 for d in deltas if d > 0)
    return sum(comb(n, j) for j in range(k, n + 1)) / 2.0**n


def run_optimization_compare(spec: ExperimentSpec) -> list[dict]:
    """Paired comparison of the l2 and bias_reg objectives on identical
    seeds, splits, and augmented data."""
    spec.validate()
    per_mode: dict[str, list[dict]] = {"l2": [], "bias_reg": []}
    per_seed_rows = []
    deltas = {k: [] for k in METRIC_KEYS}
    for seed in spec.seeds:
        data = _prepare_seed(spec, seed, spec.pipeline.num_semesters, with_gan=True)
        scores = {}
        for mode in ("l2", "bias_reg"):
            config = _variant_config(spec, seed, spec.pipeline.train.dropout_rate, mode)
            scores[mode] = _train_and_score(data, config, augmented=True)
            per_mode[mode].append(scores[mode])
            per_seed_rows.append({"loss_mode": mode, "seed": seed, **scores[mode]})
        for k in METRIC_KEYS:
            deltas[k].append(scores["bias_reg"][k] - scores["l2"][k])
    rows = [{"loss_mode": mode, **_aggregate(per_mode[mode])} for mode in ("l2", "bias_reg")]
    summary = {"loss_mode": "bias_reg_minus_l2"}
    for k in METRIC_KEYS:
        summary[f"{k}_mean"] = float(np.mean(deltas[k]))
        summary[f"{k}_std"] = float(np.std(deltas[k], ddof=1)) if len(deltas[k]) > 1 else 0.0
    summary["sign_test_p_macro_f1"] = sign_test_p(deltas["macro_f1"])
    rows.append(summary)
    _emit(spec, "optimization_compare", rows, per_seed_rows)
    return rows


def run_experiment(spec: ExperimentSpec) -> list[dict]:
    spec.validate()
    runner = {
        "variants": run_variants,
        "semester_ablation": run_semester_ablation,
        "dropout_sweep": run_dropout_sweep,
        "lr_sweep": run_lr_sweep,
        "embed_dim_sweep": run_embed_dim_sweep,
        "optimization_compare": run_optimization_compare,
    }[spec.kind]
    return runner(spec)


# ---------------------------------------------------------------------------
# table output


def write_table_csv(rows: list[dict], path) -> None:
    if not rows:
        return
    columns = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row.get(c, "") for c in columns])


def _emit(spec: ExperimentSpec, name: str, rows: list[dict], per_seed_rows: list[dict]) -> None:
    if spec.out_dir is None:
        return
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_table_csv(rows, out / f"{name}.csv")
    write_table_csv(per_seed_rows, out / f"{name}_per_seed.csv")
    with open(out / f"{name}.json", "w") as fh:
        json.dump({"experiment": name, "seeds": list(spec.seeds), "rows": rows}, fh, indent=2)
        fh.write("\n")


__all__ = [
    "DROPOUT_GRID",
    "EMBED_DIM_GRID",
    "EXPERIMENT_KINDS",
    "LR_GRID",
    "ExperimentSpec",
    "default_experiment_pipeline",
    "default_experiment_synth",
    "run_dropout_sweep",
    "run_embed_dim_sweep",
    "run_experiment",
    "run_lr_sweep",
    "run_optimization_compare",
    "run_semester_ablation",
    "run_variants",
    "sign_test_p",
    "write_table_csv",
]
