import math

import numpy as np
import pytest

from lcnn.optim import AdamState, SgdConfig, adam_step, bce_loss, sgd_step, sigmoid

from helpers import max_rel_err

rng = np.random.default_rng(99)


class TestSigmoid:
    def test_zero_maps_to_half(self):
        assert sigmoid(np.array([0.0]))[0] == 0.5

    def test_saturation_without_overflow(self):
        with np.errstate(over="raise"):
            hi = sigmoid(np.array([100.0]))[0]
            lo = sigmoid(np.array([-100.0]))[0]
        assert abs(hi - 1.0) < 1e-12
        assert lo < 1e-12

    def test_symmetry_identity(self):
        z = rng.standard_normal(100) * 5
        np.testing.assert_allclose(sigmoid(-z), 1.0 - sigmoid(z), atol=1e-15)

    def test_preserves_float32(self):
        assert sigmoid(np.zeros(3, dtype=np.float32)).dtype == np.float32


class TestBceLoss:
    def test_perfect_prediction_near_zero(self):
        out = bce_loss(np.array([1.0]), np.array([1.0 - 1e-7]))
        assert out.value == pytest.approx(0.0, abs=1e-6)

    def test_half_probability_is_ln2(self):
        out = bce_loss(np.array([0.0]), np.array([0.5]))
        assert out.value == pytest.approx(math.log(2.0), abs=1e-9)

    def test_point_one_is_minus_ln_point_one(self):
        out = bce_loss(np.array([1.0]), np.array([0.1]))
        assert out.value == pytest.approx(-math.log(0.1), abs=1e-9)

    def test_labels_must_be_binary(self):
        with pytest.raises(ValueError):
            bce_loss(np.array([0.5]), np.array([0.5]))

    def test_loss_is_nonnegative(self):
        for _ in range(50):
            y = float(rng.integers(0, 2))
            p = float(rng.uniform(1e-6, 1 - 1e-6))
            assert bce_loss(np.array([y]), np.array([p])).value >= 0.0

    def test_batch_loss_is_mean(self):
        y = np.array([1.0, 0.0])
        p = np.array([0.9, 0.2])
        single = [bce_loss(y[i : i + 1], p[i : i + 1]).value for i in range(2)]
        assert bce_loss(y, p).value == pytest.approx(np.mean(single), rel=1e-12)

    def test_fused_gradient_matches_finite_differences(self):
        # d/dz of bce(sigmoid(z)) must equal sigmoid(z) - y.
        z = rng.standard_normal(20) * 3
        y = rng.integers(0, 2, size=20).astype(np.float64)
        p = sigmoid(z)
        grad = bce_loss(y, p).grad_wrt_logit * y.size  # per-sample gradient
        eps = 1e-5
        for i in range(20):
            zp = z.copy()
            zp[i] += eps
            zm = z.copy()
            zm[i] -= eps
            lp = bce_loss(y[i : i + 1], sigmoid(zp[i : i + 1])).value
            lm = bce_loss(y[i : i + 1], sigmoid(zm[i : i + 1])).value
            num = (lp - lm) / (2 * eps)
            assert max_rel_err(grad[i], num) < 1e-8
        np.testing.assert_allclose(grad, p - y, atol=1e-12)


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        p = rng.random((4, 4))
        before = p.copy()
        adam_step(p, np.zeros_like(p), AdamState(eta=0.005))
        np.testing.assert_array_equal(p, before)

    def test_first_step_moves_by_eta_sign(self):
        p = np.zeros(5)
        g = np.array([3.0, -2.0, 0.5, -0.1, 10.0])
        adam_step(p, g, AdamState(eta=0.005))
        np.testing.assert_allclose(p, -0.005 * np.sign(g), rtol=1e-6)

    def test_converges_on_quadratic(self):
        # 200 steps on f(w) = w^2 from w0 = 1 with eta 0.1 ends near 0.
        w = np.array([1.0])
        state = AdamState(eta=0.1)
        for _ in range(200):
            adam_step(w, 2.0 * w, state)
        assert abs(w[0]) < 0.05

    def test_reduces_to_sign_sgd_with_zero_betas(self):
        state = AdamState(eta=0.01, beta1=0.0, beta2=0.0, eps=1e-300)
        for _ in range(5):
            p = rng.standard_normal(8)
            g = rng.standard_normal(8)
            before = p.copy()
            adam_step(p, g, state)
            np.testing.assert_allclose(before - p, 0.01 * np.sign(g), atol=1e-9)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            adam_step(np.zeros(3), np.zeros(4), AdamState())

    def test_step_counter_increments(self):
        state = AdamState()
        p = np.zeros(2)
        for t in range(1, 4):
            adam_step(p, np.ones(2), state)
            assert state.t == t

    def test_deterministic(self):
        def run():
            p = np.ones(6)
            state = AdamState(eta=0.02)
            for i in range(10):
                adam_step(p, np.sin(np.arange(6) + i), state)
            return p

        np.testing.assert_array_equal(run(), run())

    def test_invalid_hyperparams(self):
        with pytest.raises(ValueError):
            AdamState(eta=0.0)
        with pytest.raises(ValueError):
            AdamState(beta1=1.0)


class TestSgd:
    def test_zero_gradient(self):
        p = rng.random(4)
        before = p.copy()
        sgd_step(p, np.zeros(4), SgdConfig(eta=0.1))
        np.testing.assert_array_equal(p, before)

    def test_one_step_arithmetic(self):
        p = np.array([1.0])
        sgd_step(p, np.array([2.0]), SgdConfig(eta=0.1))
        assert p[0] == pytest.approx(0.8, abs=1e-15)

    def test_matches_adam_direction(self):
        g = rng.standard_normal(10)
        p_sgd = np.zeros(10)
        p_adam = np.zeros(10)
        sgd_step(p_sgd, g, SgdConfig(eta=0.01))
        adam_step(p_adam, g, AdamState(eta=0.01))
        assert np.all(np.sign(p_sgd[g != 0]) == np.sign(p_adam[g != 0]))

    def test_positive_eta_required(self):
        with pytest.raises(ValueError):
            SgdConfig(eta=-1.0)
