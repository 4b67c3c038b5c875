import numpy as np
import pytest

from lcnn.layers import BatchNorm, Conv2D, Dense, Dropout, Flatten, MaxPool2D, ReLU
from lcnn.tensor import make_rng

from helpers import central_diff, max_rel_err, naive_conv2d, naive_maxpool

rng = np.random.default_rng(20240811)


def fresh_conv(method="im2col", padding="same", cin=2, cout=3, k=3, seed=7):
    return Conv2D(cin, cout, k, padding=padding, rng=make_rng(seed), dtype=np.float64,
                  method=method)


class TestConvForward:
    def test_identity_kernel(self):
        c = Conv2D(1, 1, 1, padding="same", dtype=np.float64)
        c.kernels[...] = 1.0
        x = rng.random((2, 5, 5, 1))
        np.testing.assert_array_equal(c.forward(x), x)

    def test_hand_example_2x2_valid(self):
        c = Conv2D(1, 1, 2, padding="valid", dtype=np.float64)
        c.kernels[...] = 1.0
        x = np.array([[1, 2, 3], [4, 5, 6], [7, 8, 9]], dtype=np.float64)[None, :, :, None]
        np.testing.assert_array_equal(c.forward(x)[0, :, :, 0],
                                      np.array([[12.0, 16.0], [24.0, 28.0]]))

    @pytest.mark.parametrize("method", ["im2col", "direct"])
    @pytest.mark.parametrize("padding", ["same", "valid"])
    def test_against_sliding_window_oracle(self, method, padding):
        c = fresh_conv(method=method, padding=padding)
        x = rng.standard_normal((2, 6, 7, 2))
        got = c.forward(x)
        want = naive_conv2d(x, c.kernels, padding=padding)
        if method == "direct":
            np.testing.assert_array_equal(got, want)
        else:
            assert max_rel_err(got, want) < 1e-13

    def test_same_mode_preserves_extent_for_odd_kernels(self):
        for k in (1, 3, 5, 9):
            c = Conv2D(1, 2, k, padding="same", rng=make_rng(k), dtype=np.float64)
            assert c.forward(rng.random((1, 12, 11, 1))).shape == (1, 12, 11, 2)

    def test_valid_mode_extent_rule(self):
        c = Conv2D(1, 1, 3, padding="valid", dtype=np.float64)
        assert c.forward(rng.random((1, 10, 8, 1))).shape == (1, 8, 6, 1)

    def test_channel_mismatch_rejected(self):
        c = fresh_conv()
        with pytest.raises(ValueError):
            c.forward(rng.random((1, 5, 5, 4)))

    def test_even_kernel_same_padding_rejected(self):
        with pytest.raises(ValueError):
            Conv2D(1, 1, 2, padding="same")

    def test_backward_before_forward_rejected(self):
        c = fresh_conv()
        with pytest.raises(RuntimeError):
            c.backward(rng.random((1, 5, 5, 3)))


class TestConvBackward:
    @pytest.mark.parametrize("method", ["im2col", "direct"])
    @pytest.mark.parametrize("padding", ["same", "valid"])
    def test_input_grad_matches_finite_differences(self, method, padding):
        c = fresh_conv(method=method, padding=padding)
        x = rng.standard_normal((2, 6, 6, 2))
        gy = rng.standard_normal(c.forward(x).shape)

        c.zero_grads()
        dx = c.backward(gy)

        def loss(xv):
            return float((fresh_conv(method=method, padding=padding).forward(xv) * gy).sum())

        assert max_rel_err(dx, central_diff(loss, x)) < 1e-6

    def test_kernel_grad_matches_finite_differences(self):
        c = fresh_conv()
        x = rng.standard_normal((2, 6, 6, 2))
        gy = rng.standard_normal(c.forward(x).shape)
        c.zero_grads()
        c.backward(gy)

        def loss(kv):
            c2 = fresh_conv()
            c2.kernels[...] = kv
            return float((c2.forward(x) * gy).sum())

        assert max_rel_err(c.grad_kernels, central_diff(loss, c.kernels)) < 1e-6

    def test_all_ones_kernel_grad_counts_covering_windows(self):
        # For L = sum(output) with an all-ones kernel, dL/dx[p] is the number
        # of valid windows covering cell p; brute-forced on a 5x5 input.
        c = Conv2D(1, 1, 3, padding="valid", dtype=np.float64)
        c.kernels[...] = 1.0
        x = rng.random((1, 5, 5, 1))
        y = c.forward(x)
        c.zero_grads()
        dx = c.backward(np.ones_like(y))
        counts = np.zeros((5, 5))
        for i in range(3):
            for j in range(3):
                counts[i : i + 3, j : j + 3] += 1
        np.testing.assert_array_equal(dx[0, :, :, 0], counts)

    def test_grad_accumulates_across_backwards(self):
        c = fresh_conv()
        x = rng.standard_normal((1, 5, 5, 2))
        gy = rng.standard_normal(c.forward(x).shape)
        c.zero_grads()
        c.backward(gy)
        once = c.grad_kernels.copy()
        c.forward(x)
        c.backward(gy)
        np.testing.assert_allclose(c.grad_kernels, 2 * once, rtol=1e-12)


class TestMaxPool:
    def test_constant_input(self):
        mp = MaxPool2D(2)
        x = np.full((1, 4, 4, 2), 3.25)
        np.testing.assert_array_equal(mp.forward(x), np.full((1, 2, 2, 2), 3.25))

    def test_hand_example(self):
        mp = MaxPool2D(2)
        x = np.array([[1, 2, 5, 6], [3, 4, 7, 8], [9, 10, 13, 14], [11, 12, 15, 16]],
                     dtype=np.float64)[None, :, :, None]
        np.testing.assert_array_equal(mp.forward(x)[0, :, :, 0],
                                      np.array([[4.0, 8.0], [12.0, 16.0]]))

    def test_floor_rule_25_over_4(self):
        mp = MaxPool2D(4)
        assert mp.forward(rng.random((1, 25, 25, 3))).shape == (1, 6, 6, 3)

    def test_against_windowed_max_oracle(self):
        for _ in range(20):
            h, w = rng.integers(4, 12, size=2)
            ph, pw = rng.integers(2, 4, size=2)
            if ph > h or pw > w:
                continue
            x = rng.standard_normal((2, h, w, 3))
            got = MaxPool2D(int(ph), int(pw)).forward(x)
            np.testing.assert_array_equal(got, naive_maxpool(x, int(ph), int(pw)))

    def test_channel_count_preserved(self):
        assert MaxPool2D(2).forward(rng.random((1, 6, 6, 5))).shape[-1] == 5

    def test_pool_larger_than_input_rejected(self):
        with pytest.raises(ValueError):
            MaxPool2D(5).forward(rng.random((1, 4, 4, 1)))

    def test_backward_routes_to_argmax(self):
        mp = MaxPool2D(2)
        x = np.array([[1, 2, 0, 0], [3, 4, 0, 9], [0, 0, 0, 0], [0, 7, 0, 5]],
                     dtype=np.float64)[None, :, :, None]
        mp.forward(x)
        gy = np.array([[10, 20], [30, 40]], dtype=np.float64)[None, :, :, None]
        dx = mp.backward(gy)[0, :, :, 0]
        want = np.zeros((4, 4))
        want[1, 1] = 10  # max 4
        want[1, 3] = 20  # max 9
        want[3, 1] = 30  # max 7
        want[3, 3] = 40  # max 5
        np.testing.assert_array_equal(dx, want)

    def test_tie_goes_to_first_row_major_cell(self):
        mp = MaxPool2D(2)
        x = np.full((1, 2, 2, 1), 5.0)  # all tied
        mp.forward(x)
        dx = mp.backward(np.array([[[[7.0]]]]))
        want = np.zeros((1, 2, 2, 1))
        want[0, 0, 0, 0] = 7.0
        np.testing.assert_array_equal(dx, want)

    def test_floor_rule_drops_trailing_gradient(self):
        mp = MaxPool2D(2)
        x = rng.random((1, 5, 5, 1))
        y = mp.forward(x)
        dx = mp.backward(np.ones_like(y))
        assert dx.shape == x.shape
        assert dx[0, 4, :, 0].sum() == 0 and dx[0, :, 4, 0].sum() == 0


class TestReLU:
    def test_sign_cases(self):
        r = ReLU()
        np.testing.assert_array_equal(r.forward(np.array([-1.0, 0.0, 2.0])),
                                      np.array([0.0, 0.0, 2.0]))

    def test_positive_identity(self):
        r = ReLU()
        x = rng.random((3, 4)) + 0.1
        np.testing.assert_array_equal(r.forward(x), x)

    def test_backward_gates(self):
        r = ReLU()
        r.forward(np.array([-1.0, 2.0]))
        np.testing.assert_array_equal(r.backward(np.array([5.0, 7.0])), np.array([0.0, 7.0]))

    def test_subgradient_at_zero_is_zero(self):
        r = ReLU()
        r.forward(np.array([0.0]))
        np.testing.assert_array_equal(r.backward(np.array([3.0])), np.array([0.0]))


class TestBatchNorm:
    def test_train_mode_standardizes(self):
        bn = BatchNorm(3, dtype=np.float64)
        x = rng.standard_normal((16, 4, 4, 3)) * 2.0 + 5.0
        y = bn.forward(x, training=True)
        means = y.reshape(-1, 3).mean(axis=0)
        vars_ = y.reshape(-1, 3).var(axis=0)
        assert np.abs(means).max() < 1e-5
        assert np.abs(vars_ - 1.0).max() < 1e-4  # eps shifts variance slightly

    def test_constant_batch_outputs_beta(self):
        bn = BatchNorm(2, dtype=np.float64)
        bn.beta[...] = np.array([0.5, -0.25])
        x = np.full((4, 2), 7.0)
        y = bn.forward(x, training=True)
        np.testing.assert_allclose(y, np.broadcast_to(bn.beta, (4, 2)), atol=1e-12)

    def test_batch_of_one_rejected_in_train_mode(self):
        bn = BatchNorm(2)
        with pytest.raises(ValueError):
            bn.forward(np.ones((1, 2)), training=True)
        bn.forward(np.ones((1, 2)), training=False)  # eval mode is fine

    def test_eval_uses_running_stats_only(self):
        bn = BatchNorm(2, dtype=np.float64)
        x = rng.standard_normal((8, 2)) + 3.0
        bn.forward(x, training=True)
        rm = bn.running_mean.copy()
        rv = bn.running_var.copy()
        y = bn.forward(x, training=False)
        np.testing.assert_allclose(y, (x - rm) / np.sqrt(rv + bn.eps), rtol=1e-12)
        np.testing.assert_array_equal(bn.running_mean, rm)  # eval does not update

    def test_running_stats_momentum_update(self):
        bn = BatchNorm(1, momentum=0.9, dtype=np.float64)
        x = np.array([[1.0], [3.0]])
        bn.forward(x, training=True)
        np.testing.assert_allclose(bn.running_mean, [0.9 * 0.0 + 0.1 * 2.0])
        np.testing.assert_allclose(bn.running_var, [0.9 * 1.0 + 0.1 * 1.0])

    def test_backward_matches_finite_differences(self):
        x = rng.standard_normal((4, 3, 3, 2))
        gy = rng.standard_normal((4, 3, 3, 2))

        bn = BatchNorm(2, dtype=np.float64)
        bn.gamma[...] = rng.random(2) + 0.5
        bn.beta[...] = rng.random(2)
        bn.forward(x, training=True)
        bn.zero_grads()
        dx = bn.backward(gy)

        def loss_x(xv):
            b2 = BatchNorm(2, dtype=np.float64)
            b2.gamma[...] = bn.gamma
            b2.beta[...] = bn.beta
            return float((b2.forward(xv, training=True) * gy).sum())

        assert max_rel_err(dx, central_diff(loss_x, x)) < 1e-5

        def loss_gamma(gv):
            b2 = BatchNorm(2, dtype=np.float64)
            b2.gamma[...] = gv
            b2.beta[...] = bn.beta
            return float((b2.forward(x, training=True) * gy).sum())

        assert max_rel_err(bn.grad_gamma, central_diff(loss_gamma, bn.gamma)) < 1e-6

        def loss_beta(bv):
            b2 = BatchNorm(2, dtype=np.float64)
            b2.gamma[...] = bn.gamma
            b2.beta[...] = bv
            return float((b2.forward(x, training=True) * gy).sum())

        assert max_rel_err(bn.grad_beta, central_diff(loss_beta, bn.beta)) < 1e-6

    def test_eval_mode_backward_is_affine(self):
        bn = BatchNorm(2, dtype=np.float64)
        bn.forward(rng.standard_normal((8, 2)), training=True)  # set running stats
        x = rng.standard_normal((4, 2))
        bn.forward(x, training=False)
        bn.zero_grads()
        gy = rng.standard_normal((4, 2))
        dx = bn.backward(gy)
        np.testing.assert_allclose(
            dx, gy * bn.gamma / np.sqrt(bn.running_var + bn.eps), rtol=1e-12
        )


class TestDense:
    def test_identity_weights(self):
        d = Dense(3, 3, dtype=np.float64)
        d.weights[...] = np.eye(3)
        d.bias[...] = 0.0
        x = rng.random((4, 3))
        np.testing.assert_array_equal(d.forward(x), x)

    def test_single_sample_weight_grad_is_outer_product(self):
        d = Dense(4, 2, rng=make_rng(5), dtype=np.float64)
        x = rng.standard_normal((1, 4))
        gy = rng.standard_normal((1, 2))
        d.forward(x)
        d.zero_grads()
        d.backward(gy)
        np.testing.assert_allclose(d.grad_weights, np.outer(x[0], gy[0]), rtol=1e-12)

    def test_backward_matches_finite_differences(self):
        d = Dense(5, 3, rng=make_rng(8), dtype=np.float64)
        x = rng.standard_normal((2, 5))
        gy = rng.standard_normal((2, 3))
        d.forward(x)
        d.zero_grads()
        dx = d.backward(gy)

        def loss_x(xv):
            return float(((xv @ d.weights + d.bias) * gy).sum())

        assert max_rel_err(dx, central_diff(loss_x, x)) < 1e-6

        def loss_w(wv):
            return float(((x @ wv + d.bias) * gy).sum())

        assert max_rel_err(d.grad_weights, central_diff(loss_w, d.weights)) < 1e-6

        def loss_b(bv):
            return float(((x @ d.weights + bv) * gy).sum())

        assert max_rel_err(d.grad_bias, central_diff(loss_b, d.bias)) < 1e-6

    def test_dim_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Dense(4, 2).forward(np.ones((1, 5)))


class TestDropout:
    def test_rate_zero_is_identity(self):
        d = Dropout(0.0, rng=make_rng(0))
        x = rng.random((10, 10))
        np.testing.assert_array_equal(d.forward(x, training=True), x)
        np.testing.assert_array_equal(d.forward(x, training=False), x)

    def test_eval_mode_is_identity(self):
        d = Dropout(0.7, rng=make_rng(0))
        x = rng.random((10, 10))
        np.testing.assert_array_equal(d.forward(x, training=False), x)

    def test_kept_fraction_and_mean_preserved(self):
        d = Dropout(0.5, rng=make_rng(42))
        x = np.ones(100000)
        y = d.forward(x, training=True)
        kept = np.count_nonzero(y) / y.size
        assert abs(kept - 0.5) < 0.01
        assert abs(y.mean() - 1.0) < 0.02  # inverted scaling preserves E[x]

    def test_backward_applies_same_mask(self):
        d = Dropout(0.5, rng=make_rng(3))
        x = rng.random((40, 40)) + 0.5
        y = d.forward(x, training=True)
        gy = np.ones_like(x)
        dy = d.backward(gy)
        np.testing.assert_array_equal(dy == 0.0, y == 0.0)
        np.testing.assert_allclose(dy[dy != 0], 2.0)

    def test_mask_expectation_recovers_input(self):
        # Mean over many masks approximates the identity within 2%.
        d = Dropout(0.5, rng=make_rng(17))
        x = np.linspace(0.5, 2.0, 8)
        acc = np.zeros_like(x)
        n = 10000
        for _ in range(n):
            acc += d.forward(x, training=True)
        np.testing.assert_allclose(acc / n, x, rtol=0.02)

    def test_invalid_rate(self):
        with pytest.raises(ValueError):
            Dropout(1.0)
        with pytest.raises(ValueError):
            Dropout(-0.1)


class TestFlatten:
    def test_round_trip(self):
        f = Flatten()
        x = rng.random((2, 3, 4, 5))
        y = f.forward(x)
        assert y.shape == (2, 60)
        np.testing.assert_array_equal(f.backward(y), x)
