"""Scratch driver: explore the variant ladder + loss comparison regimes."""
import sys
import time
from dataclasses import replace

import numpy as np

from jobseq.autoencoder import embed_semesters, encode_cohort_with
from jobseq.bias import bias_profiles
from jobseq.classifier import TrainConfig, predict_labels, train_classifier
from jobseq.cohort import SynthConfig, stratified_split, synth_cohort, uniform_bias_spec
from jobseq.gan import GanConfig
from jobseq.metrics import compute_metrics
from jobseq.pipeline import augment_features, cohort_features


def prep(synth, seed, ae_epochs=150, gan_cfg=None, weight_mode="as_written"):
    cohort = synth_cohort(replace(synth, seed=seed))
    train_c, test_c = stratified_split(cohort, 0.2, seed)
    emb = embed_semesters(train_c, code_dim=3, hidden_dims=(64,), epochs=ae_epochs,
                          learning_rate=1.0, seed=seed + 1)
    profiles = bias_profiles(train_c, weight_mode)
    x_tr, y_tr, _ = cohort_features(train_c, emb, 6)
    x_te, y_te, _ = cohort_features(test_c, encode_cohort_with(emb, test_c), 6)
    aug, _ = augment_features(x_tr, y_tr, gan_cfg or GanConfig(), seed=seed + 2)
    return x_tr, y_tr, x_te, y_te, profiles, aug


def score(model, x_te, y_te):
    rep = compute_metrics(predict_labels(model, x_te), y_te)
    return {"acc": rep.accuracy, "prec": rep.macro_precision,
            "rec": rep.macro_recall, "f1": rep.macro_f1}


def run(seeds, synth, epochs=300, hidden=16, dropout=0.3, lr=0.01,
        ae_epochs=150, gan_cfg=None, weight_mode="as_written"):
    rows = {name: [] for name in ("raw", "gan", "drop_gan", "drop_gan_bias")}
    for seed in seeds:
        t0 = time.time()
        x_tr, y_tr, x_te, y_te, profiles, aug = prep(synth, seed, ae_epochs, gan_cfg, weight_mode)
        variants = [
            ("raw", x_tr, y_tr, 0.0, "l2"),
            ("gan", aug.x, aug.y, 0.0, "l2"),
            ("drop_gan", aug.x, aug.y, dropout, "l2"),
            ("drop_gan_bias", aug.x, aug.y, dropout, "bias_reg"),
        ]
        for name, x, y, rate, mode in variants:
            cfg = TrainConfig(epochs=epochs, dropout_rate=rate, loss_mode=mode,
                              seed=seed, hidden_size=hidden, learning_rate=lr)
            model, _ = train_classifier(x, y, profiles, cfg)
            rows[name].append(score(model, x_te, y_te))
        print(f"  seed {seed}: " + "  ".join(
            f"{name}={rows[name][-1]['f1']:.3f}" for name in rows) +
            f"  rawrec={rows['raw'][-1]['rec']:.3f}  ({time.time()-t0:.0f}s)", flush=True)
    print("MEANS:")
    for name in rows:
        m = {k: np.mean([r[k] for r in rows[name]]) for k in rows[name][0]}
        print(f"  {name:14s} acc={m['acc']:.4f} prec={m['prec']:.4f} rec={m['rec']:.4f} f1={m['f1']:.4f}")
    return rows


def make_synth(effect=2.2, effect2=1.8, density=0.85, courses=15, ability=2.0, base=0.83):
    return SynthConfig(
        num_students=2000, num_majors=20, num_colleges=5,
        courses_per_semester=courses, enrollment_density=density,
        base_employment_rate=base,
        planted_bias_spec=uniform_bias_spec(20, [("gender", effect), ("nation", effect2)]),
        ability_effect=ability, seed=0,
    )


if __name__ == "__main__":
    mode = sys.argv[1] if len(sys.argv) > 1 else "ladder"
    synth = make_synth()
    if mode == "ladder":
        seeds = range(int(sys.argv[2]) if len(sys.argv) > 2 else 3)
        epochs = int(sys.argv[3]) if len(sys.argv) > 3 else 300
        lr = float(sys.argv[4]) if len(sys.argv) > 4 else 0.01
        wm = sys.argv[5] if len(sys.argv) > 5 else "as_written"
        run(seeds, synth, epochs=epochs, lr=lr, weight_mode=wm)
