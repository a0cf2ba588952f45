"""Single-layer peephole LSTM with per-gate binary dropout masks.

The five mask vectors (input gate, forget gate, cell, output gate, hidden
output) are sampled once per sequence and reused at every timestep, so a
dropped unit stays dropped along the whole time dimension. Masks use
inverted-dropout scaling: kept entries equal 1/(1-rate), so prediction runs
with all units and no rescaling.

Peephole weights are diagonal (elementwise vectors over the cell state).
The cell-candidate pre-activation includes the input term W_xc x_t.

Everything here is written against fp64 numpy and is validated by the test
suite against finite differences; the backward pass exposes the per-step
error signals for the hidden output (eps_h, masked by m_h) and the output
gate (eps_o = eps_h * tanh(c) * m_o).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from ._math import dsigmoid_from_output, sigmoid
from .errors import ValidationError


@dataclass
class LstmParams:
    """Gate weights; w_c* are diagonal peepholes stored as vectors."""

    w_xi: np.ndarray  # (H, D)
    w_hi: np.ndarray  # (H, H)
    w_ci: np.ndarray  # (H,)
    b_i: np.ndarray  # (H,)
    w_xf: np.ndarray
    w_hf: np.ndarray
    w_cf: np.ndarray
    b_f: np.ndarray
    w_xc: np.ndarray
    w_hc: np.ndarray
    b_c: np.ndarray
    w_xo: np.ndarray
    w_ho: np.ndarray
    w_co: np.ndarray
    b_o: np.ndarray

    @property
    def hidden_size(self) -> int:
        return self.w_xi.shape[0]

    @property
    def input_size(self) -> int:
        return self.w_xi.shape[1]

    def copy(self) -> "LstmParams":
        return LstmParams(**{f.name: getattr(self, f.name).copy() for f in fields(self)})


PARAM_FIELDS = tuple(f.name for f in fields(LstmParams))


def init_lstm_params(input_size: int, hidden_size: int, rng: np.random.Generator) -> LstmParams:
    """Uniform [-1/sqrt(H), 1/sqrt(H)] init; forget bias starts at +1."""
    r = 1.0 / np.sqrt(hidden_size)

    def mat(rows, cols):
        return rng.uniform(-r, r, size=(rows, cols))

    def vec(n):
        return rng.uniform(-r, r, size=n)

    params = LstmParams(
        w_xi=mat(hidden_size, input_size),
        w_hi=mat(hidden_size, hidden_size),
        w_ci=vec(hidden_size),
        b_i=np.zeros(hidden_size),
        w_xf=mat(hidden_size, input_size),
        w_hf=mat(hidden_size, hidden_size),
        w_cf=vec(hidden_size),
        b_f=np.full(hidden_size, 1.0),
        w_xc=mat(hidden_size, input_size),
        w_hc=mat(hidden_size, hidden_size),
        b_c=np.zeros(hidden_size),
        w_xo=mat(hidden_size, input_size),
        w_ho=mat(hidden_size, hidden_size),
        w_co=vec(hidden_size),
        b_o=np.zeros(hidden_size),
    )
    return params


@dataclass
class MaskSet:
    """Binary dropout masks for the five gate/output sites.

    Entries are 0 (dropped) or 1/(1-dropout_rate) (kept, inverted scaling).
    Arrays are (H,) for one sequence or (N, H) for a batch of sequences,
    one row per sequence, reused at every timestep. (T, N, H) arrays hold
    the per-timestep-resample ablation mode.
    """

    m_i: np.ndarray
    m_f: np.ndarray
    m_c: np.ndarray
    m_o: np.ndarray
    m_h: np.ndarray
    dropout_rate: float = 0.0

    def hidden_size(self) -> int:
        return self.m_i.shape[-1]

    def at(self, t: int) -> "MaskSet":
        """The masks applied at timestep t (identical for 1-D/2-D masks)."""
        if self.m_i.ndim < 3:
            return self
        return MaskSet(
            self.m_i[t], self.m_f[t], self.m_c[t], self.m_o[t], self.m_h[t], self.dropout_rate
        )


def identity_masks(hidden_size: int, n: int | None = None) -> MaskSet:
    shape = (hidden_size,) if n is None else (n, hidden_size)
    ones = np.ones(shape)
    return MaskSet(ones, ones.copy(), ones.copy(), ones.copy(), ones.copy(), dropout_rate=0.0)


def sample_masks(
    rate: float,
    hidden_size: int,
    seed: int | None = None,
    n: int | None = None,
    rng: np.random.Generator | None = None,
) -> MaskSet:
    """Draw one mask set; each entry is independently dropped with
    probability ``rate`` and otherwise scaled to 1/(1-rate)."""
    if not (0.0 <= rate < 1.0):
        raise ValidationError(f"dropout rate {rate} outside [0, 1)")
    if rate == 0.0:
        return identity_masks(hidden_size, n)
    if rng is None:
        rng = np.random.default_rng(seed)
    shape = (hidden_size,) if n is None else (n, hidden_size)
    keep = 1.0 / (1.0 - rate)

    def draw():
        return np.where(rng.random(shape) < rate, 0.0, keep)

    return MaskSet(draw(), draw(), draw(), draw(), draw(), dropout_rate=rate)


@dataclass
class ForwardCache:
    """Everything the backward pass needs, stacked over time (T, N, H)."""

    x: np.ndarray  # (T, N, D)
    h_prev: np.ndarray  # (T, N, H) hidden state entering each step
    c_prev: np.ndarray  # (T, N, H) cell state entering each step
    i_hat: np.ndarray  # unmasked sigmoid of the input-gate pre-activation
    f_hat: np.ndarray
    o_hat: np.ndarray
    g: np.ndarray  # tanh cell candidate
    i: np.ndarray  # masked gates actually used
    f: np.ndarray
    o: np.ndarray
    c: np.ndarray  # masked cell state
    tanh_c: np.ndarray
    h: np.ndarray  # masked hidden output


@dataclass
class Gradients:
    """Parameter gradients plus input gradients and the per-step error
    signals for the hidden output and the output gate."""

    w_xi: np.ndarray
    w_hi: np.ndarray
    w_ci: np.ndarray
    b_i: np.ndarray
    w_xf: np.ndarray
    w_hf: np.ndarray
    w_cf: np.ndarray
    b_f: np.ndarray
    w_xc: np.ndarray
    w_hc: np.ndarray
    b_c: np.ndarray
    w_xo: np.ndarray
    w_ho: np.ndarray
    w_co: np.ndarray
    b_o: np.ndarray
    d_x: np.ndarray  # (T, N, D)
    eps_h: np.ndarray  # (T, N, H)
    eps_o: np.ndarray  # (T, N, H)


def _as_batch(arr, name):
    a = np.asarray(arr, dtype=float)
    if a.ndim == 1:
        return a[None, :], True
    if a.ndim == 2:
        return a, False
    raise ValidationError(f"{name} must be a vector or a (batch, dim) matrix")


def _mask_rows(masks: MaskSet, n: int) -> MaskSet:
    """Broadcast-check masks against a batch of n sequences."""
    m = masks.m_i
    if m.ndim >= 2 and m.shape[-2] != n and m.shape[-2] != 1:
        raise ValidationError(f"mask batch {m.shape[-2]} does not match input batch {n}")
    return masks


def cell_forward(params: LstmParams, x, h_prev, c_prev, masks: MaskSet):
    """One masked step; returns (h, c, cache row).

    Each gate is masked right after its activation, the cell right after
    assembly, the hidden output right after the output product.
    """
    xb, single = _as_batch(x, "x")
    hb, _ = _as_batch(h_prev, "h_prev")
    cb, _ = _as_batch(c_prev, "c_prev")
    if xb.shape[1] != params.input_size:
        raise ValidationError(f"x has dim {xb.shape[1]}, params expect {params.input_size}")
    if hb.shape[1] != params.hidden_size or cb.shape[1] != params.hidden_size:
        raise ValidationError("state dims do not match hidden size")
    _mask_rows(masks, xb.shape[0])

    i_hat = sigmoid(xb @ params.w_xi.T + hb @ params.w_hi.T + cb * params.w_ci + params.b_i)
    i = i_hat * masks.m_i
    f_hat = sigmoid(xb @ params.w_xf.T + hb @ params.w_hf.T + cb * params.w_cf + params.b_f)
    f = f_hat * masks.m_f
    g = np.tanh(xb @ params.w_xc.T + hb @ params.w_hc.T + params.b_c)
    c = (f * cb + i * g) * masks.m_c
    o_hat = sigmoid(xb @ params.w_xo.T + hb @ params.w_ho.T + c * params.w_co + params.b_o)
    o = o_hat * masks.m_o
    tanh_c = np.tanh(c)
    h = o * tanh_c * masks.m_h

    cache = {
        "x": xb, "h_prev": hb, "c_prev": cb,
        "i_hat": i_hat, "f_hat": f_hat, "o_hat": o_hat, "g": g,
        "i": i, "f": f, "o": o, "c": c, "tanh_c": tanh_c, "h": h,
    }
    if single:
        return h[0], c[0], cache
    return h, c, cache


def _stack_inputs(sequence):
    """Accept (T, N, D), (T, D), or a list of step vectors/matrices."""
    if isinstance(sequence, (list, tuple)):
        steps = [np.asarray(s, dtype=float) for s in sequence]
        if not steps:
            raise ValidationError("sequence is empty")
        arr = np.stack([np.atleast_2d(s) for s in steps])
        single = steps[0].ndim == 1
        return arr, single
    arr = np.asarray(sequence, dtype=float)
    if arr.ndim == 2:  # (T, D)
        return arr[:, None, :], True
    if arr.ndim == 3:
        return arr, False
    raise ValidationError("sequence must be (T, D), (T, N, D), or a list of steps")


_CACHE_KEYS = (
    "x", "h_prev", "c_prev", "i_hat", "f_hat", "o_hat", "g", "i", "f", "o", "c", "tanh_c", "h"
)


def forward(params: LstmParams, sequence, masks: MaskSet):
    """Run the masked cell over a sequence with h_0 = c_0 = 0, reusing the
    same mask set at every step. Returns (hidden states, ForwardCache)."""
    xs, single = _stack_inputs(sequence)
    t_len, n, d = xs.shape
    if d != params.input_size:
        raise ValidationError(f"inputs have dim {d}, params expect {params.input_size}")
    hdim = params.hidden_size
    _mask_rows(masks, n)

    store = {
        k: (xs if k == "x" else np.empty((t_len, n, hdim))) for k in _CACHE_KEYS
    }
    h = np.zeros((n, hdim))
    c = np.zeros((n, hdim))
    for t in range(t_len):
        h, c, cache = cell_forward(params, xs[t], h, c, masks.at(t))
        for k in _CACHE_KEYS[1:]:
            store[k][t] = cache[k]
    cache = ForwardCache(**store)
    hs = cache.h
    if single:
        return hs[:, 0, :], cache
    return hs, cache


def predict_mode_forward(params: LstmParams, sequence):
    """Prediction pass: all units active (identity masks), deterministic."""
    xs, single = _stack_inputs(sequence)
    masks = identity_masks(params.hidden_size)
    hs, _ = forward(params, xs, masks)
    return hs[:, 0, :] if single else hs


def backward(params: LstmParams, cache: ForwardCache, masks: MaskSet, d_h) -> Gradients:
    """Backpropagation through time for the masked cell.

    ``d_h`` holds dLoss/dh_t per timestep, same layout as cache.h. The
    returned eps_h is the error at the pre-mask hidden product (upstream
    error times m_h); eps_o is the error at the unmasked output-gate
    activation (eps_h * tanh(c_t) * m_o).
    """
    d_h = np.asarray(d_h, dtype=float)
    if d_h.ndim == 2:  # (T, H) single sequence
        d_h = d_h[:, None, :]
    if d_h.shape != cache.h.shape:
        raise ValidationError(f"d_h shape {d_h.shape} does not match cached hiddens {cache.h.shape}")
    t_len, n, hdim = cache.h.shape
    _mask_rows(masks, n)

    grads = {name: np.zeros_like(getattr(params, name)) for name in PARAM_FIELDS}
    d_x = np.zeros_like(cache.x)
    eps_h_all = np.zeros_like(cache.h)
    eps_o_all = np.zeros_like(cache.h)

    dh_next = np.zeros((n, hdim))
    dc_next = np.zeros((n, hdim))
    for t in range(t_len - 1, -1, -1):
        m = masks.at(t)
        eps_h = (d_h[t] + dh_next) * m.m_h
        eps_o = eps_h * cache.tanh_c[t] * m.m_o
        eps_h_all[t] = eps_h
        eps_o_all[t] = eps_o

        dzo = eps_o * dsigmoid_from_output(cache.o_hat[t])
        dc = (
            eps_h * cache.o[t] * (1.0 - cache.tanh_c[t] ** 2)
            + dzo * params.w_co
            + dc_next
        )
        dpre_c = dc * m.m_c

        di = dpre_c * cache.g[t]  # gradient at the masked input gate
        dzi = di * m.m_i * dsigmoid_from_output(cache.i_hat[t])
        df = dpre_c * cache.c_prev[t]
        dzf = df * m.m_f * dsigmoid_from_output(cache.f_hat[t])
        dg = dpre_c * cache.i[t]
        dzg = dg * (1.0 - cache.g[t] ** 2)

        x_t = cache.x[t]
        h_prev = cache.h_prev[t]
        c_prev = cache.c_prev[t]
        grads["w_xi"] += dzi.T @ x_t
        grads["w_hi"] += dzi.T @ h_prev
        grads["w_ci"] += (dzi * c_prev).sum(axis=0)
        grads["b_i"] += dzi.sum(axis=0)
        grads["w_xf"] += dzf.T @ x_t
        grads["w_hf"] += dzf.T @ h_prev
        grads["w_cf"] += (dzf * c_prev).sum(axis=0)
        grads["b_f"] += dzf.sum(axis=0)
        grads["w_xc"] += dzg.T @ x_t
        grads["w_hc"] += dzg.T @ h_prev
        grads["b_c"] += dzg.sum(axis=0)
        grads["w_xo"] += dzo.T @ x_t
        grads["w_ho"] += dzo.T @ h_prev
        grads["w_co"] += (dzo * cache.c[t]).sum(axis=0)
        grads["b_o"] += dzo.sum(axis=0)

        d_x[t] = dzi @ params.w_xi + dzf @ params.w_xf + dzg @ params.w_xc + dzo @ params.w_xo
        dh_next = dzi @ params.w_hi + dzf @ params.w_hf + dzg @ params.w_hc + dzo @ params.w_ho
        dc_next = dpre_c * cache.f[t] + dzi * params.w_ci + dzf * params.w_cf

    return Gradients(d_x=d_x, eps_h=eps_h_all, eps_o=eps_o_all, **grads)


def params_to_json(params: LstmParams) -> dict:
    d = {name: getattr(params, name).tolist() for name in PARAM_FIELDS}
    d["hidden_size"] = params.hidden_size
    d["input_size"] = params.input_size
    return d


def params_from_json(d: dict) -> LstmParams:
    return LstmParams(**{name: np.asarray(d[name], dtype=float) for name in PARAM_FIELDS})


__all__ = [
    "ForwardCache",
    "Gradients",
    "LstmParams",
    "MaskSet",
    "backward",
    "cell_forward",
    "forward",
    "identity_masks",
    "init_lstm_params",
    "params_from_json",
    "params_to_json",
    "predict_mode_forward",
    "sample_masks",
]
