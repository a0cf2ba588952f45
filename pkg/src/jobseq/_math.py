"""Small numerical helpers shared by the hand-written networks."""

import numpy as np


def sigmoid(x):
    """Logistic function 1 / (1 + e^-x), stable for large |x|.

    Computed as 1/(1+e^-x) for x >= 0 and e^x/(1+e^x) otherwise, via a
    single exp of -|x|."""
    arr = np.asarray(x, dtype=float)
    ex = np.exp(-np.abs(arr))
    out = np.where(arr >= 0, 1.0 / (1.0 + ex), ex / (1.0 + ex))
    return float(out) if out.ndim == 0 else out


def dsigmoid_from_output(s):
    """Derivative of the logistic function expressed via its output."""
    return s * (1.0 - s)


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p / (1.0 - p))


def glorot_uniform(rng, fan_out, fan_in):
    """Weight matrix drawn uniformly from +-sqrt(6 / (fan_in + fan_out))."""
    r = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-r, r, size=(fan_out, fan_in))


def relative_error(a, b, floor=1e-6):
    """Elementwise |a-b| / max(|a|+|b|, floor); used by gradient checks."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.abs(a) + np.abs(b), floor)
    return np.abs(a - b) / denom
