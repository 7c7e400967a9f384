"""Control->amplitude network: shapes, init, forward semantics, gradients."""

import math

import numpy as np
import pytest

from noisebands.errors import ModelError
from noisebands.model import (
    AMP_FLOOR,
    SIGMOID_POWER,
    ModelConfig,
    backward,
    forward,
    init_params,
    pack_params,
    param_count,
    param_names,
    param_shapes,
    scaled_sigmoid,
    unpack_params,
)


TINY = ModelConfig(num_controls=1, hidden_size=4, num_bands=8, output_depth=3)


def make_params(seed=3, config=TINY):
    return init_params(config, seed=seed)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ModelError):
            ModelConfig(num_controls=0)
        with pytest.raises(ModelError):
            ModelConfig(num_controls=1, hidden_size=0)
        with pytest.raises(ModelError):
            ModelConfig(num_controls=1, num_bands=0)
        with pytest.raises(ModelError):
            ModelConfig(num_controls=1, output_depth=-1)
        # depth 0 is legal: the head reads the recurrent state directly
        ModelConfig(num_controls=1, output_depth=0)

    def test_default_sizes(self):
        cfg = ModelConfig(num_controls=2)
        assert cfg.hidden_size == 128
        assert cfg.num_bands == 2048
        assert cfg.output_depth == 3


class TestParamLayout:
    def test_counts_match_shape_arithmetic(self):
        for c in (1, 2, 3):
            cfg = ModelConfig(num_controls=c)
            by_shape = sum(int(np.prod(s)) for s in param_shapes(cfg).values())
            assert param_count(cfg) == by_shape

    def test_counts_at_default_sizes(self):
        # hand tally: input stacks 4*C*H; recurrent core 3H*(C*H) + 3H*H + 6H;
        # output stack depth*(H*H + 3H); head M*H + M
        h, m, depth = 128, 2048, 3
        for c, expected in ((2, 463744), (1, 414080)):
            tally = (4 * c * h
                     + 3 * h * (c * h) + 3 * h * h + 6 * h
                     + depth * (h * h + 3 * h)
                     + m * h + m)
            assert expected == tally
            assert param_count(ModelConfig(num_controls=c)) == expected

    def test_canonical_name_order(self):
        names = param_names(TINY)
        assert names[0] == "in0.w"
        assert names.index("gru.w_ih") < names.index("gru.w_hh")
        assert names[-1] == "head.b"
        assert len(names) == len(set(names))
        assert set(names) == set(param_shapes(TINY))

    def test_pack_unpack_round_trip(self):
        params = make_params()
        flat = pack_params(params)
        assert flat.shape == (param_count(TINY),)
        again = unpack_params(TINY, flat)
        for name in param_names(TINY):
            np.testing.assert_array_equal(params.tensors[name], again.tensors[name])

    def test_unpack_rejects_wrong_length(self):
        with pytest.raises(ModelError):
            unpack_params(TINY, np.zeros(param_count(TINY) + 1))


class TestInit:
    def test_deterministic_per_seed(self):
        a = pack_params(make_params(seed=5))
        b = pack_params(make_params(seed=5))
        np.testing.assert_array_equal(a, b)
        c = pack_params(make_params(seed=6))
        assert not np.array_equal(a, c)

    def test_uniform_bounds_scale_with_fan_in(self):
        cfg = ModelConfig(num_controls=2, hidden_size=64, num_bands=32, output_depth=2)
        params = init_params(cfg, seed=0)
        fan_in = {"in0.w": 1, "in1.w": 1,
                  "gru.w_ih": 2 * 64, "gru.w_hh": 64,
                  "out0.w": 64, "out1.w": 64, "head.w": 64}
        for name, fan in fan_in.items():
            w = params.tensors[name]
            bound = 1.0 / math.sqrt(fan)
            assert np.abs(w).max() <= bound
            assert np.abs(w).max() > 0.5 * bound  # actually fills the range

    def test_biases_zero_gains_one(self):
        params = make_params()
        for name, t in params.tensors.items():
            if name.endswith(".b") or name.endswith("b_ih") or name.endswith("b_hh") \
                    or name.endswith(".offset"):
                np.testing.assert_array_equal(t, np.zeros_like(t))
            if name.endswith(".gain"):
                np.testing.assert_array_equal(t, np.ones_like(t))


class TestScaledSigmoid:
    def test_value_at_zero(self):
        # 2 * 0.5**ln(10) + floor = 0.40552...
        want = 2.0 * 0.5 ** math.log(10.0) + AMP_FLOOR
        assert scaled_sigmoid(np.array(0.0)) == pytest.approx(want, abs=1e-15)
        assert scaled_sigmoid(np.array(0.0)) == pytest.approx(0.4054, abs=1e-3)

    def test_asymptotes(self):
        assert scaled_sigmoid(np.array(-50.0)) == pytest.approx(AMP_FLOOR, rel=1e-9)
        assert scaled_sigmoid(np.array(50.0)) == pytest.approx(2.0 + AMP_FLOOR, abs=1e-12)

    def test_monotone_and_bounded(self):
        x = np.linspace(-60, 60, 1001)
        y = scaled_sigmoid(x)
        assert np.all(np.diff(y) >= 0.0)
        assert y.min() >= AMP_FLOOR * (1 - 1e-12)
        assert y.max() <= 2.0 + AMP_FLOOR

    def test_exponent_is_ln_ten(self):
        assert SIGMOID_POWER == pytest.approx(math.log(10.0), rel=1e-15)

    def test_no_overflow_at_extremes(self):
        y = scaled_sigmoid(np.array([-1e4, 1e4]))
        assert np.isfinite(y).all()


class TestForward:
    def test_output_shapes(self):
        params = make_params()
        controls = np.random.default_rng(0).random((16, 1))
        amps, h = forward(params, controls)
        assert amps.shape == (16, TINY.num_bands)
        assert h.shape == (TINY.hidden_size,)

    def test_batched_shapes(self):
        params = make_params()
        controls = np.random.default_rng(0).random((5, 16, 1))
        amps, h = forward(params, controls)
        assert amps.shape == (5, 16, TINY.num_bands)
        assert h.shape == (5, TINY.hidden_size)

    def test_amplitudes_in_sigmoid_range(self):
        params = make_params()
        controls = np.random.default_rng(1).random((32, 1))
        amps, _ = forward(params, controls)
        assert amps.min() >= AMP_FLOOR * (1 - 1e-12)
        assert amps.max() <= 2.0 + AMP_FLOOR

    def test_repeat_run_bit_identical(self):
        params = make_params()
        controls = np.random.default_rng(2).random((20, 1))
        a1, h1 = forward(params, controls)
        a2, h2 = forward(params, controls)
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(h1, h2)

    def test_batch_rows_match_single_runs(self):
        params = make_params()
        controls = np.random.default_rng(3).random((4, 12, 1))
        batched, hb = forward(params, controls)
        for b in range(4):
            single, hs = forward(params, controls[b])
            np.testing.assert_allclose(batched[b], single, atol=1e-12)
            np.testing.assert_allclose(hb[b], hs, atol=1e-12)

    def test_state_carry_matches_one_shot(self):
        params = make_params()
        controls = np.random.default_rng(4).random((24, 1))
        full, h_full = forward(params, controls)
        first, h_mid = forward(params, controls[:10])
        second, h_end = forward(params, controls[10:], h0=h_mid)
        np.testing.assert_allclose(np.concatenate([first, second]), full, atol=1e-12)
        np.testing.assert_allclose(h_end, h_full, atol=1e-12)

    def test_recurrence_makes_output_history_dependent(self):
        params = make_params()
        rng = np.random.default_rng(5)
        tail = rng.random((6, 1))
        a = forward(params, np.concatenate([np.zeros((6, 1)), tail]))[0]
        b = forward(params, np.concatenate([np.ones((6, 1)), tail]))[0]
        assert not np.allclose(a[6:], b[6:])

    def test_rejects_wrong_control_width(self):
        params = make_params()
        with pytest.raises(ModelError):
            forward(params, np.zeros((8, 2)))


class TestGradients:
    def test_quadratic_loss_gradcheck_eps_1e4(self):
        # tiny setup, central differences at eps = 1e-4, 64-bit:
        # every coordinate within 1e-4 relative error
        params = make_params()
        rng = np.random.default_rng(6)
        controls = rng.random((16, 1))
        target = rng.random((16, TINY.num_bands))
        weight = rng.random((16, TINY.num_bands)) + 0.5

        def loss_of(flat):
            p = unpack_params(TINY, flat)
            amps, _ = forward(p, controls)
            return float(np.sum(weight * (amps - target) ** 2))

        amps, _, cache = forward(params, controls, want_cache=True)
        damps = 2.0 * weight * (amps - target)
        grads = backward(params, cache, damps[None])
        flat_g = np.concatenate([grads[n].ravel() for n in param_names(TINY)])
        flat = pack_params(params)

        eps = 1e-4
        for i in range(flat.size):
            up = flat.copy()
            up[i] += eps
            dn = flat.copy()
            dn[i] -= eps
            num = (loss_of(up) - loss_of(dn)) / (2 * eps)
            scale = max(abs(num), abs(flat_g[i]), 1e-8)
            assert abs(flat_g[i] - num) / scale <= 1e-4, f"coordinate {i}"

    def test_constant_loss_gives_zero_gradient(self):
        params = make_params()
        controls = np.random.default_rng(7).random((16, 1))
        _, _, cache = forward(params, controls, want_cache=True)
        grads = backward(params, cache, np.zeros((1, 16, TINY.num_bands)))
        for name in param_names(TINY):
            np.testing.assert_array_equal(grads[name], np.zeros_like(grads[name]))

    def test_head_bias_gradient_closed_form(self):
        # For loss = sum(c * amps), the head-bias gradient has the hand-derived
        # closed form  sum_t c * p * (amps - floor) * (1 - sigma(logit)),
        # where sigma(logit) = ((amps - floor) / 2) ** (1 / p).
        params = make_params()
        rng = np.random.default_rng(8)
        controls = rng.random((16, 1))
        c = rng.random((16, TINY.num_bands))
        amps, _, cache = forward(params, controls, want_cache=True)
        grads = backward(params, cache, c[None])
        sig = ((amps - AMP_FLOOR) / 2.0) ** (1.0 / SIGMOID_POWER)
        expected = (c * SIGMOID_POWER * (amps - AMP_FLOOR) * (1.0 - sig)).sum(axis=0)
        np.testing.assert_allclose(grads["head.b"], expected, rtol=1e-9, atol=1e-12)

    def test_gradient_shapes_match_parameters(self):
        params = make_params()
        controls = np.random.default_rng(9).random((8, 1))
        amps, _, cache = forward(params, controls, want_cache=True)
        grads = backward(params, cache, np.ones((1, 8, TINY.num_bands)))
        for name, shape in param_shapes(TINY).items():
            assert grads[name].shape == shape

    def test_batched_gradients_sum_over_items(self):
        params = make_params()
        rng = np.random.default_rng(10)
        controls = rng.random((3, 8, 1))
        damps = rng.standard_normal((3, 8, TINY.num_bands))
        _, _, cache = forward(params, controls, want_cache=True)
        grads = backward(params, cache, damps)
        total = np.zeros_like(grads["head.b"])
        for b in range(3):
            _, _, cb = forward(params, controls[b], want_cache=True)
            gb = backward(params, cb, damps[b][None])
            total += gb["head.b"]
        np.testing.assert_allclose(grads["head.b"], total, atol=1e-10)
