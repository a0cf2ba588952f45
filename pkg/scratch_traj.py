"""Epoch-trajectory probe: test metrics vs epochs for several configs."""
import sys

import numpy as np

from jobseq.classifier import (
    PARAM_NAMES,
    SequenceModel,
    TrainConfig,
    _data_gradients,
    _regularizer,
    init_head,
    predict_labels,
    split_features,
)
from jobseq.lstm import identity_masks, init_lstm_params, sample_masks
from jobseq.metrics import compute_metrics
from scratch_ladder import make_synth, prep


def train_with_eval(x, y, profiles, config, x_te, y_te, eval_every=25):
    n = x.shape[0]
    rng = np.random.default_rng(config.seed)
    lstm = init_lstm_params(config.code_dim, config.hidden_size, rng)
    head = init_head(config.hidden_size, rng)
    seq, _ = split_features(x, config.code_dim)
    model = SequenceModel(lstm=lstm, head=head, code_dim=config.code_dim,
                          num_semesters=seq.shape[0])
    reg_value, reg_grad = _regularizer(config, profiles, lambda: head.bias_block)
    hdim = config.hidden_size
    lr = config.learning_rate
    curve = []
    for epoch in range(config.epochs):
        if config.dropout_rate > 0:
            masks = sample_masks(config.dropout_rate, hdim, n=n, rng=rng)
        else:
            masks = identity_masks(hdim)
        data_loss, lstm_grads, d_w, d_b = _data_gradients(model, x, y, masks)
        for name in PARAM_NAMES:
            getattr(lstm, name).__isub__(lr * getattr(lstm_grads, name))
        d_w[:, hdim:] += reg_grad()
        head.w -= lr * d_w
        head.b -= lr * d_b
        if (epoch + 1) % eval_every == 0:
            rep = compute_metrics(predict_labels(model, x_te), y_te)
            rep_tr = compute_metrics(predict_labels(model, x), y)
            curve.append((epoch + 1, rep.macro_f1, rep.macro_recall, rep_tr.macro_f1))
    return curve


if __name__ == "__main__":
    lr = float(sys.argv[1]) if len(sys.argv) > 1 else 0.01
    epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 400
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 0
    synth = make_synth()
    x_tr, y_tr, x_te, y_te, profiles, aug = prep(synth, seed)
    configs = [
        ("raw l2       ", x_tr, y_tr, 0.0, "l2"),
        ("aug l2       ", aug.x, aug.y, 0.0, "l2"),
        ("aug l2 drop  ", aug.x, aug.y, 0.3, "l2"),
        ("aug bias drop", aug.x, aug.y, 0.3, "bias_reg"),
    ]
    curves = {}
    for name, x, y, rate, mode in configs:
        cfg = TrainConfig(epochs=epochs, dropout_rate=rate, loss_mode=mode,
                          seed=seed, hidden_size=16, learning_rate=lr)
        curves[name] = train_with_eval(x, y, profiles, cfg, x_te, y_te)
        print(name, " ".join(f"{e}:f1={f:.3f}/rec={r:.3f}/tr={t:.2f}" for e, f, r, t in curves[name]),
              flush=True)
