import numpy as np
import pytest

from lcnn.tensor import (
    derive_seed,
    elementwise,
    fill,
    make_rng,
    matmul,
    pad2d_same,
    random_tensor,
)

from helpers import naive_matmul


class TestFill:
    def test_zero_case(self):
        np.testing.assert_array_equal(fill((2, 2), 0.0), np.zeros((2, 2), np.float32))

    def test_singleton(self):
        np.testing.assert_array_equal(fill((1,), 3.5), np.array([3.5], np.float32))

    def test_element_count_is_product_of_extents(self):
        t = fill((2, 3), 1.0)
        assert t.size == 6
        assert np.all(t == 1.0)

    def test_zero_extent_rejected(self):
        with pytest.raises(ValueError):
            fill((2, 0), 1.0)
        with pytest.raises(ValueError):
            fill((), 1.0)


class TestRandomTensor:
    def test_same_seed_bit_identical(self):
        a = random_tensor((50, 50), ("uniform", 0.0, 1.0), make_rng(123))
        b = random_tensor((50, 50), ("uniform", 0.0, 1.0), make_rng(123))
        assert a.tobytes() == b.tobytes()

    def test_uniform_mean(self):
        # Law of large numbers: 1e5 samples of U(0,1) average near 0.5.
        t = random_tensor((100000,), ("uniform", 0.0, 1.0), make_rng(7), dtype=np.float64)
        assert abs(t.mean() - 0.5) < 0.01

    def test_normal_variance(self):
        t = random_tensor((100000,), ("normal", 0.0, 1.0), make_rng(11), dtype=np.float64)
        assert abs(t.var() - 1.0) < 0.05

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            random_tensor((4,), ("uniform", 1.0, 0.0), make_rng(0))
        with pytest.raises(ValueError):
            random_tensor((4,), ("normal", 0.0, 0.0), make_rng(0))
        with pytest.raises(ValueError):
            random_tensor((4,), ("poisson", 1.0, 2.0), make_rng(0))


class TestElementwise:
    def test_add(self):
        np.testing.assert_array_equal(elementwise("add", np.array([1.0, 2.0]), np.array([3.0, 4.0])),
                                      np.array([4.0, 6.0]))

    def test_mul_by_zero_annihilates(self):
        x = make_rng(3).random((4, 5))
        np.testing.assert_array_equal(elementwise("mul", x, np.zeros_like(x)), np.zeros_like(x))

    def test_scalar_max_clamps(self):
        np.testing.assert_array_equal(elementwise("max", np.array([-1.0, 5.0]), 0.0),
                                      np.array([0.0, 5.0]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            elementwise("add", np.ones((2, 2)), np.ones((2, 3)))

    def test_scale_requires_scalar(self):
        np.testing.assert_array_equal(elementwise("scale", np.array([1.0, 2.0]), 3.0),
                                      np.array([3.0, 6.0]))
        with pytest.raises(ValueError):
            elementwise("scale", np.ones(3), np.ones(3))

    def test_commutativity_on_random_tensors(self):
        rng = make_rng(5)
        a = rng.random((6, 7))
        b = rng.random((6, 7))
        for op in ("add", "mul", "max"):
            np.testing.assert_array_equal(elementwise(op, a, b), elementwise(op, b, a))

    def test_associativity_of_max(self):
        rng = make_rng(9)
        a, b, c = (rng.random((5, 5)) for _ in range(3))
        left = elementwise("max", elementwise("max", a, b), c)
        right = elementwise("max", a, elementwise("max", b, c))
        np.testing.assert_array_equal(left, right)


class TestMatmul:
    def test_identity(self):
        a = make_rng(1).random((3, 3))
        np.testing.assert_array_equal(matmul(np.eye(3), a), a)

    def test_hand_example(self):
        out = matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]]))
        np.testing.assert_array_equal(out, np.array([[17.0], [39.0]]))

    def test_zeros_absorb(self):
        a = make_rng(2).random((4, 3))
        np.testing.assert_array_equal(matmul(a, np.zeros((3, 2))), np.zeros((4, 2)))

    def test_against_triple_loop_oracle(self):
        rng = make_rng(13)
        a = rng.random((8, 8))
        b = rng.random((8, 8))
        got = matmul(a, b)
        want = naive_matmul(a, b)
        rel = np.abs(got - want) / np.maximum(1e-300, np.abs(want))
        assert rel.max() < 1e-12

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            matmul(np.ones((2, 3)), np.ones((2, 3)))


class TestPad2dSame:
    def test_100_with_9x9_pads_to_108(self):
        x = fill((100, 100, 1), 1.0)
        assert pad2d_same(x, 9, 9).shape == (108, 108, 1)

    def test_1x1_kernel_unchanged(self):
        x = make_rng(4).random((5, 6, 2))
        np.testing.assert_array_equal(pad2d_same(x, 1, 1), x)

    def test_border_is_zero(self):
        x = fill((4, 4, 1), 1.0)
        p = pad2d_same(x, 3, 3)
        assert p.shape == (6, 6, 1)
        assert p[0].sum() == 0 and p[-1].sum() == 0
        assert p[:, 0].sum() == 0 and p[:, -1].sum() == 0
        np.testing.assert_array_equal(p[1:-1, 1:-1], x)

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            pad2d_same(fill((4, 4, 1), 0.0), 2, 2)

    def test_batched_input(self):
        x = make_rng(6).random((2, 10, 10, 3))
        assert pad2d_same(x, 5, 5).shape == (2, 14, 14, 3)


class TestIndexing:
    def test_row_major_round_trip(self):
        # flatten(unflatten) identity over every valid multi-index
        rng = make_rng(21)
        x = rng.random((3, 4, 5))
        flat = x.reshape(-1)
        for idx in np.ndindex(*x.shape):
            assert flat[np.ravel_multi_index(idx, x.shape)] == x[idx]

    def test_seed_derivation_is_stable_and_distinct(self):
        assert derive_seed(42, "split") == derive_seed(42, "split")
        assert derive_seed(42, "split") != derive_seed(42, "augment")
        assert derive_seed(41, "split") != derive_seed(42, "split")
