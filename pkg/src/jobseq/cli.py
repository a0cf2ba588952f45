"""Command-line interface.

Global flags: --seed (overrides every config seed), --config (JSON document
with optional "synth" and "pipeline" sections), --out (output directory).
Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click

from .autoencoder import embed_semesters
from .bias import SIGNIFICANCE_THRESHOLD, bias_report
from .classifier import DEMOGRAPHIC_DIM
from .cohort import SynthConfig, read_cohort_dir, synth_cohort, write_cohort
from .errors import NumericalError, ValidationError
from .experiments import EXPERIMENT_KINDS, ExperimentSpec, run_experiment
from .metrics import compute_metrics
from .pipeline import (
    PipelineConfig,
    augment_features,
    cohort_features,
    fit_pipeline,
    load_bundle,
    predict_cohort,
    save_bundle,
)


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"validation error: {exc}", err=True)
            sys.exit(1)
        except FileNotFoundError as exc:
            click.echo(f"validation error: {exc}", err=True)
            sys.exit(1)
        except NumericalError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(2)

    return wrapper


@click.group()
@click.option("--seed", type=int, default=None, help="Override every configured seed.")
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON config file.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory.")
@click.pass_context
def main(ctx, seed, config_path, out_dir):
    """Bias-aware graduate employment prediction pipeline."""
    ctx.ensure_object(dict)
    doc = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            click.echo(f"validation error: missing config file {path}", err=True)
            sys.exit(1)
        with open(path) as fh:
            doc = json.load(fh)
    ctx.obj.update({"seed": seed, "config": doc, "out": out_dir})


def _require_out(ctx) -> Path:
    out = ctx.obj.get("out")
    if out is None:
        raise ValidationError("an output directory is required; pass --out before the subcommand")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _synth_config(ctx) -> SynthConfig:
    doc = ctx.obj["config"].get("synth", {})
    config = SynthConfig.from_json(doc) if doc else SynthConfig()
    if ctx.obj["seed"] is not None:
        config.seed = ctx.obj["seed"]
    return config


def _pipeline_config(ctx) -> PipelineConfig:
    doc = ctx.obj["config"].get("pipeline", {})
    config = PipelineConfig.from_json(doc) if doc else PipelineConfig()
    if ctx.obj["seed"] is not None:
        config.seed = ctx.obj["seed"]
    return config


@main.command()
@click.pass_context
@_handle_errors
def synth(ctx):
    """Generate a synthetic cohort and write its three CSVs."""
    out = _require_out(ctx)
    config = _synth_config(ctx)
    cohort = synth_cohort(config)
    write_cohort(cohort, out)
    with open(out / "synth_config.json", "w") as fh:
        json.dump(config.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    rate = float(cohort.labels().mean())
    click.echo(
        f"wrote cohort: {len(cohort)} students, {cohort.num_majors} majors, "
        f"{len(cohort.grades)} grade rows, employment rate {rate:.3f}"
    )


@main.command("analyze-bias")
@click.option("--data", "data_dir", type=click.Path(), required=True, help="Cohort CSV directory.")
@click.option("--threshold", type=float, default=SIGNIFICANCE_THRESHOLD, show_default=True)
@click.pass_context
@_handle_errors
def analyze_bias(ctx, data_dir, threshold):
    """Chi-square bias tests per major and aspect, written as JSON."""
    out = _require_out(ctx)
    cohort = read_cohort_dir(data_dir)
    report = bias_report(cohort, threshold)
    with open(out / "bias_report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    flagged = sum(
        1
        for major in report["majors"].values()
        for aspect in major.values()
        if aspect["significant"]
    )
    click.echo(f"wrote bias report: {len(report['majors'])} majors, {flagged} significant tests")


@main.command()
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.pass_context
@_handle_errors
def embed(ctx, data_dir):
    """Train per-semester encoders and write the code vectors as CSV."""
    out = _require_out(ctx)
    config = _pipeline_config(ctx)
    cohort = read_cohort_dir(data_dir)
    embedding = embed_semesters(
        cohort,
        code_dim=config.ae.code_dim,
        hidden_dims=config.ae.hidden_dims,
        epochs=config.ae.epochs,
        learning_rate=config.ae.learning_rate,
        seed=config.seed + 1,
    )
    path = out / "embeddings.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["student_id", "semester", *[f"c{j}" for j in range(config.ae.code_dim)]]
        )
        for emb in embedding.semesters:
            for row, student_id in enumerate(emb.row_index):
                writer.writerow([student_id, emb.semester, *[repr(v) for v in emb.codes[row]]])
    click.echo(f"wrote {path}")


@main.command()
@click.option("--data", "data_dir", type=click.Path(), required=True, help="Training cohort directory.")
@click.pass_context
@_handle_errors
def augment(ctx, data_dir):
    """Balance a training cohort with generated minority rows (feature CSV)."""
    out = _require_out(ctx)
    config = _pipeline_config(ctx)
    cohort = read_cohort_dir(data_dir)
    embedding = embed_semesters(
        cohort,
        code_dim=config.ae.code_dim,
        hidden_dims=config.ae.hidden_dims,
        epochs=config.ae.epochs,
        learning_rate=config.ae.learning_rate,
        seed=config.seed + 1,
    )
    x, y, ids = cohort_features(cohort, embedding, config.num_semesters)
    augmented, _gan = augment_features(x, y, config.gan, seed=config.seed + 2)
    path = out / "balanced_features.csv"
    n_codes = x.shape[1] - DEMOGRAPHIC_DIM
    header = (
        ["student_id"]
        + [f"x{j}" for j in range(n_codes)]
        + ["gender", "nation", "hometown_level", "enroll_status", "label", "synthetic"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        flags = augmented.synthetic_flags
        all_x = augmented.x
        all_y = augmented.y
        for i in range(all_x.shape[0]):
            sid = ids[i] if i < len(ids) else f"G{i - len(ids):05d}"
            writer.writerow([sid, *[repr(v) for v in all_x[i]], int(all_y[i]), int(flags[i])])
    click.echo(
        f"wrote {path}: {len(augmented.y_real)} real rows, "
        f"{len(augmented.y_synthetic)} synthetic rows"
    )


@main.command()
@click.option("--data", "data_dir", type=click.Path(), required=True, help="Training cohort directory.")
@click.pass_context
@_handle_errors
def train(ctx, data_dir):
    """Fit the full pipeline on a training cohort; writes model.json."""
    out = _require_out(ctx)
    config = _pipeline_config(ctx)
    cohort = read_cohort_dir(data_dir)
    bundle = fit_pipeline(cohort, config)
    save_bundle(bundle, out / "model.json")
    with open(out / "history.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "objective"])
        for epoch, value in enumerate(bundle.history):
            writer.writerow([epoch, repr(value)])
    click.echo(f"wrote {out / 'model.json'}; final objective {bundle.history[-1]:.6f}")


@main.command()
@click.option("--model", "model_path", type=click.Path(), required=True)
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.pass_context
@_handle_errors
def predict(ctx, model_path, data_dir):
    """Score a cohort with a saved model; writes predictions.csv."""
    out = _require_out(ctx)
    if not Path(model_path).exists():
        raise ValidationError(f"missing model checkpoint {model_path}")
    bundle = load_bundle(model_path)
    cohort = read_cohort_dir(data_dir)
    ids, probs, labels, y_true = predict_cohort(bundle, cohort)
    path = out / "predictions.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["student_id", "probability", "label"])
        for sid, p, lab in zip(ids, probs, labels):
            writer.writerow([sid, repr(float(p)), int(lab)])
    report = compute_metrics(labels, y_true)
    with open(out / "metrics.json", "w") as fh:
        json.dump(report.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(f"wrote {path}; accuracy {report.accuracy:.3f}, macro F1 {report.macro_f1:.3f}")


@main.command()
@click.argument("kind", type=click.Choice(EXPERIMENT_KINDS))
@click.option("--seeds", default="0,1,2", show_default=True, help="Comma-separated seed list.")
@click.pass_context
@_handle_errors
def experiment(ctx, kind, seeds):
    """Run one of the study harnesses and write its tables."""
    out = _require_out(ctx)
    try:
        seed_list = [int(s) for s in seeds.split(",") if s.strip() != ""]
    except ValueError:
        raise ValidationError(f"bad --seeds value {seeds!r}") from None
    doc = ctx.obj["config"]
    spec = ExperimentSpec(kind=kind, seeds=seed_list, out_dir=str(out))
    if "synth" in doc:
        spec.synth = SynthConfig.from_json(doc["synth"])
    if "pipeline" in doc:
        spec.pipeline = PipelineConfig.from_json(doc["pipeline"])
    if ctx.obj["seed"] is not None:
        spec.seeds = [ctx.obj["seed"] + i for i in range(len(seed_list))]
    rows = run_experiment(spec)
    click.echo(f"wrote {kind} tables to {out} ({len(rows)} rows)")


if __name__ == "__main__":
    main()
