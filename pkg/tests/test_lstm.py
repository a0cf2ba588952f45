import numpy as np
import pytest

from jobseq._math import relative_error, sigmoid
from jobseq.errors import ValidationError
from jobseq.lstm import (
    PARAM_FIELDS,
    LstmParams,
    MaskSet,
    backward,
    cell_forward,
    forward,
    identity_masks,
    init_lstm_params,
    params_from_json,
    params_to_json,
    predict_mode_forward,
    sample_masks,
)


def classical_cell(p, x, h, c):
    """Unmasked reference cell, same arithmetic order as the masked one."""
    i = sigmoid(x @ p.w_xi.T + h @ p.w_hi.T + c * p.w_ci + p.b_i)
    f = sigmoid(x @ p.w_xf.T + h @ p.w_hf.T + c * p.w_cf + p.b_f)
    g = np.tanh(x @ p.w_xc.T + h @ p.w_hc.T + p.b_c)
    c_new = f * c + i * g
    o = sigmoid(x @ p.w_xo.T + h @ p.w_ho.T + c_new * p.w_co + p.b_o)
    h_new = o * np.tanh(c_new)
    return h_new, c_new


def classical_rollout(p, xs):
    n, hdim = xs.shape[1], p.hidden_size
    h = np.zeros((n, hdim))
    c = np.zeros((n, hdim))
    out = []
    for t in range(xs.shape[0]):
        h, c = classical_cell(p, xs[t], h, c)
        out.append(h)
    return np.stack(out)


def fd_param_gradients(params, xs, masks, r, eps=1e-5):
    """Central finite differences of sum(r * hidden_states)."""

    def loss():
        hs, _ = forward(params, xs, masks)
        return float(np.sum(r * hs))

    numeric = {}
    for name in PARAM_FIELDS:
        arr = getattr(params, name)
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = arr[idx]
            arr[idx] = old + eps
            up = loss()
            arr[idx] = old - eps
            down = loss()
            arr[idx] = old
            g[idx] = (up - down) / (2 * eps)
        numeric[name] = g
    return numeric


class TestMasks:
    def test_rate_zero_all_ones(self):
        masks = sample_masks(0.0, 8, seed=1)
        for m in (masks.m_i, masks.m_f, masks.m_c, masks.m_o, masks.m_h):
            assert np.all(m == 1.0)

    def test_drop_fraction_binomial_bound(self):
        masks = sample_masks(0.3, 10_000, seed=7)
        zero_fraction = float(np.mean(masks.m_h == 0.0))
        assert abs(zero_fraction - 0.3) < 0.015

    def test_kept_entries_are_inverse_scaled(self):
        masks = sample_masks(0.25, 1000, seed=3)
        kept = masks.m_i[masks.m_i != 0]
        assert np.allclose(kept, 1.0 / 0.75)

    def test_rate_one_rejected(self):
        with pytest.raises(ValidationError):
            sample_masks(1.0, 4, seed=0)

    def test_deterministic_per_seed(self):
        a = sample_masks(0.4, 64, seed=11)
        b = sample_masks(0.4, 64, seed=11)
        assert np.array_equal(a.m_c, b.m_c)


class TestCellForward:
    def test_identity_masks_reduce_to_classical_cell(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            hdim, d = int(rng.integers(1, 9)), int(rng.integers(1, 6))
            p = init_lstm_params(d, hdim, rng)
            x = rng.normal(0, 1, (3, d))
            h0 = rng.normal(0, 1, (3, hdim))
            c0 = rng.normal(0, 1, (3, hdim))
            h, c, _ = cell_forward(p, x, h0, c0, identity_masks(hdim))
            h_ref, c_ref = classical_cell(p, x, h0, c0)
            assert np.array_equal(h, h_ref)
            assert np.array_equal(c, c_ref)

    def test_zero_output_mask_annihilates(self):
        rng = np.random.default_rng(1)
        p = init_lstm_params(3, 5, rng)
        masks = identity_masks(5)
        masks.m_h = np.zeros(5)
        h, c, _ = cell_forward(p, rng.normal(0, 1, 3), np.zeros(5), np.zeros(5), masks)
        assert np.all(h == 0.0)

    def test_scalar_cell_hand_evaluation(self):
        # H=1, explicit constants; every quantity recomputed step by step
        p = LstmParams(
            w_xi=np.array([[0.4]]), w_hi=np.array([[0.2]]), w_ci=np.array([0.1]),
            b_i=np.array([0.05]),
            w_xf=np.array([[-0.3]]), w_hf=np.array([[0.6]]), w_cf=np.array([-0.2]),
            b_f=np.array([0.15]),
            w_xc=np.array([[0.7]]), w_hc=np.array([[-0.5]]), b_c=np.array([0.1]),
            w_xo=np.array([[0.25]]), w_ho=np.array([[0.35]]), w_co=np.array([0.45]),
            b_o=np.array([-0.05]),
        )
        masks = MaskSet(
            m_i=np.array([2.0]), m_f=np.array([0.0]), m_c=np.array([2.0]),
            m_o=np.array([2.0]), m_h=np.array([2.0]), dropout_rate=0.5,
        )
        x = np.array([0.5])
        h, c, _ = cell_forward(p, x, np.zeros(1), np.zeros(1), masks)

        def sig(v):
            return 1.0 / (1.0 + np.exp(-v))

        i = sig(0.4 * 0.5 + 0.05) * 2.0
        f = sig(-0.3 * 0.5 + 0.15) * 0.0
        g = np.tanh(0.7 * 0.5 + 0.1)
        c_ref = (f * 0.0 + i * g) * 2.0
        o = sig(0.25 * 0.5 + 0.45 * c_ref - 0.05) * 2.0
        h_ref = o * np.tanh(c_ref) * 2.0
        assert abs(c[0] - c_ref) < 1e-12
        assert abs(h[0] - h_ref) < 1e-12

    def test_shape_mismatch_rejected(self):
        rng = np.random.default_rng(2)
        p = init_lstm_params(3, 4, rng)
        with pytest.raises(ValidationError):
            cell_forward(p, np.zeros(5), np.zeros(4), np.zeros(4), identity_masks(4))


class TestForward:
    def test_length_one_equals_single_cell(self):
        rng = np.random.default_rng(3)
        p = init_lstm_params(2, 4, rng)
        masks = sample_masks(0.3, 4, seed=5)
        x = rng.normal(0, 1, (1, 2))
        hs, cache = forward(p, x, masks)
        h_cell, c_cell, _ = cell_forward(p, x[0], np.zeros(4), np.zeros(4), masks)
        assert np.array_equal(hs[0], h_cell)
        assert np.array_equal(cache.c[0, 0], c_cell)

    def test_six_step_identity_masks_match_classical_rollout(self):
        rng = np.random.default_rng(4)
        p = init_lstm_params(3, 6, rng)
        xs = rng.normal(0, 1, (6, 5, 3))
        hs, _ = forward(p, xs, identity_masks(6))
        assert np.array_equal(hs, classical_rollout(p, xs))

    def test_same_masks_bit_identical(self):
        rng = np.random.default_rng(5)
        p = init_lstm_params(3, 4, rng)
        xs = rng.normal(0, 1, (6, 2, 3))
        masks = sample_masks(0.5, 4, seed=9, n=2)
        a, _ = forward(p, xs, masks)
        b, _ = forward(p, xs, masks)
        assert np.array_equal(a, b)

    def test_empty_sequence_rejected(self):
        rng = np.random.default_rng(6)
        p = init_lstm_params(2, 3, rng)
        with pytest.raises(ValidationError):
            forward(p, [], identity_masks(3))

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        hdim = 3
        p = init_lstm_params(2, hdim, rng)
        xs = rng.normal(0, 1, (4, 1, 2))
        masks = sample_masks(0.4, hdim, seed=2)
        perm = np.array([2, 0, 1])

        pp = p.copy()
        pp.w_xi, pp.w_xf, pp.w_xc, pp.w_xo = (m[perm] for m in (p.w_xi, p.w_xf, p.w_xc, p.w_xo))
        pp.w_hi, pp.w_hf, pp.w_hc, pp.w_ho = (
            m[perm][:, perm] for m in (p.w_hi, p.w_hf, p.w_hc, p.w_ho)
        )
        pp.w_ci, pp.w_cf, pp.w_co = (v[perm] for v in (p.w_ci, p.w_cf, p.w_co))
        pp.b_i, pp.b_f, pp.b_c, pp.b_o = (v[perm] for v in (p.b_i, p.b_f, p.b_c, p.b_o))
        pmasks = MaskSet(
            masks.m_i[perm], masks.m_f[perm], masks.m_c[perm],
            masks.m_o[perm], masks.m_h[perm], masks.dropout_rate,
        )
        hs, _ = forward(p, xs, masks)
        hs_p, _ = forward(pp, xs, pmasks)
        assert np.allclose(hs_p, hs[:, :, perm], atol=1e-12)


class TestBackward:
    def test_zero_upstream_gives_zero_gradients(self):
        rng = np.random.default_rng(8)
        p = init_lstm_params(3, 4, rng)
        xs = rng.normal(0, 1, (6, 2, 3))
        masks = sample_masks(0.3, 4, seed=1, n=2)
        _, cache = forward(p, xs, masks)
        grads = backward(p, cache, masks, np.zeros_like(cache.h))
        for name in PARAM_FIELDS:
            assert np.all(getattr(grads, name) == 0.0)
        assert np.all(grads.d_x == 0.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        p = init_lstm_params(3, 4, rng)
        xs = rng.normal(0, 1, (6, 2, 3))
        masks = sample_masks(0.3, 4, seed=seed, n=2)
        r = rng.normal(0, 1, (6, 2, 4))
        _, cache = forward(p, xs, masks)
        grads = backward(p, cache, masks, r)
        numeric = fd_param_gradients(p, xs, masks, r)
        for name in PARAM_FIELDS:
            assert relative_error(getattr(grads, name), numeric[name]).max() < 1e-5

    def test_input_gradients_match_finite_differences(self):
        rng = np.random.default_rng(42)
        p = init_lstm_params(2, 3, rng)
        xs = rng.normal(0, 1, (4, 2, 2))
        masks = sample_masks(0.4, 3, seed=4, n=2)
        r = rng.normal(0, 1, (4, 2, 3))
        _, cache = forward(p, xs, masks)
        grads = backward(p, cache, masks, r)
        eps = 1e-5
        numeric = np.zeros_like(xs)
        it = np.nditer(xs, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = xs[idx]
            xs[idx] = old + eps
            up = float(np.sum(r * forward(p, xs, masks)[0]))
            xs[idx] = old - eps
            down = float(np.sum(r * forward(p, xs, masks)[0]))
            xs[idx] = old
            numeric[idx] = (up - down) / (2 * eps)
        assert relative_error(grads.d_x, numeric).max() < 1e-5

    def test_error_signals_follow_mask_conventions(self):
        rng = np.random.default_rng(9)
        p = init_lstm_params(3, 5, rng)
        xs = rng.normal(0, 1, (3, 2, 3))
        masks = sample_masks(0.4, 5, seed=3, n=2)
        r = rng.normal(0, 1, (3, 2, 5))
        _, cache = forward(p, xs, masks)
        grads = backward(p, cache, masks, r)
        # last step receives no recurrent error: eps_h = upstream * m_h,
        # eps_o = eps_h * tanh(c) * m_o
        assert np.array_equal(grads.eps_h[-1], r[-1] * masks.m_h)
        assert np.array_equal(
            grads.eps_o[-1], grads.eps_h[-1] * cache.tanh_c[-1] * masks.m_o
        )
        # every masked entry is zeroed at every step
        assert np.all(grads.eps_h[:, masks.m_h == 0.0] == 0.0)

    def test_mask_annihilation_zeroes_unit_gradients(self):
        rng = np.random.default_rng(10)
        hdim = 6
        p = init_lstm_params(3, hdim, rng)
        masks = sample_masks(0.3, hdim, seed=8)
        j = 2
        masks.m_h[j] = 0.0
        masks.m_c[j] = 0.0
        xs = rng.normal(0, 1, (6, 3, 3))
        hs, cache = forward(p, xs, masks)
        assert np.all(hs[:, :, j] == 0.0)
        grads = backward(p, cache, masks, rng.normal(0, 1, hs.shape))
        for name in ("w_xi", "w_hi", "w_xf", "w_hf", "w_xc", "w_hc", "w_xo", "w_ho"):
            assert np.all(getattr(grads, name)[j] == 0.0), name
        for name in ("w_ci", "w_cf", "w_co", "b_i", "b_f", "b_c", "b_o"):
            assert np.all(getattr(grads, name)[j] == 0.0), name

    def test_all_masks_zero_unit_kills_output_path(self):
        rng = np.random.default_rng(11)
        hdim = 4
        p = init_lstm_params(2, hdim, rng)
        masks = sample_masks(0.2, hdim, seed=5)
        j = 1
        for m in (masks.m_i, masks.m_f, masks.m_c, masks.m_o, masks.m_h):
            m[j] = 0.0
        xs = rng.normal(0, 1, (6, 2, 2))
        hs, _ = forward(p, xs, masks)
        assert np.all(hs[:, :, j] == 0.0)

    def test_cache_mask_mismatch_rejected(self):
        rng = np.random.default_rng(12)
        p = init_lstm_params(2, 3, rng)
        xs = rng.normal(0, 1, (2, 4, 2))
        masks = sample_masks(0.3, 3, seed=1, n=4)
        _, cache = forward(p, xs, masks)
        with pytest.raises(ValidationError):
            backward(p, cache, masks, np.zeros((3, 4, 3)))


class TestPredictMode:
    def test_equals_rate_zero_forward(self):
        rng = np.random.default_rng(13)
        p = init_lstm_params(3, 5, rng)
        xs = rng.normal(0, 1, (6, 4, 3))
        hs, _ = forward(p, xs, sample_masks(0.0, 5))
        assert np.array_equal(predict_mode_forward(p, xs), hs)

    def test_deterministic(self):
        rng = np.random.default_rng(14)
        p = init_lstm_params(2, 3, rng)
        xs = rng.normal(0, 1, (6, 2, 2))
        assert np.array_equal(predict_mode_forward(p, xs), predict_mode_forward(p, xs))

    def test_train_mode_mean_approaches_prediction_mode(self):
        # mask-linear probe: one step from zero state with no output-gate
        # peephole leaves h multilinear in the independent masks (up to the
        # cubic tanh term), so the mask average must approach the all-units
        # pass within Monte-Carlo error
        rng = np.random.default_rng(15)
        hdim, d, draws = 4, 2, 10_000
        p = init_lstm_params(d, hdim, rng)
        for name in PARAM_FIELDS:
            setattr(p, name, getattr(p, name) * 0.2)
        p.w_co = np.zeros(hdim)
        xs = rng.normal(0, 1, (1, 1, d)) * 0.3
        reference = predict_mode_forward(p, xs)[-1, 0]
        tiled = np.tile(xs, (1, draws, 1))
        masks = sample_masks(0.3, hdim, n=draws, rng=np.random.default_rng(99))
        hs, _ = forward(p, tiled, masks)
        sample = hs[-1]
        mc_mean = sample.mean(axis=0)
        mc_sem = sample.std(axis=0, ddof=1) / np.sqrt(draws)
        assert np.all(np.abs(mc_mean - reference) < 3.0 * mc_sem + 1e-5)


class TestSerialization:
    def test_round_trip(self):
        rng = np.random.default_rng(16)
        p = init_lstm_params(3, 4, rng)
        q = params_from_json(params_to_json(p))
        for name in PARAM_FIELDS:
            assert np.array_equal(getattr(p, name), getattr(q, name))
