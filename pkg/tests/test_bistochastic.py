import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from consensus_fusion.bistochastic import (
    GramKernel,
    column_normalize,
    kl_bistochastic_gram,
    kl_bistochastic_rectangular,
    kl_bistochastic_square,
)
from consensus_fusion.errors import NumericalError, ValidationError
from oracles import sinkhorn_rect_loops, sinkhorn_symmetric_loops

TOL = 1e-6


def random_symmetric(rng, n, zero_frac=0.0):
    a = rng.uniform(0.01, 5.0, size=(n, n))
    a = (a + a.T) / 2
    if zero_frac:
        mask = rng.random((n, n)) < zero_frac
        mask = mask | mask.T
        np.fill_diagonal(mask, False)
        a[mask] = 0.0
    return a


class TestSquare:
    def test_identity_fixed_point(self):
        out = kl_bistochastic_square(np.eye(4))
        np.testing.assert_array_equal(out.matrix, np.eye(4))
        assert out.sweeps == 1 and out.converged

    def test_all_ones(self):
        out = kl_bistochastic_square(np.ones((2, 2)))
        np.testing.assert_array_equal(out.matrix, np.full((2, 2), 0.5))

    def test_constant_matrix(self):
        out = kl_bistochastic_square(np.full((5, 5), 3.0))
        np.testing.assert_allclose(out.matrix, np.full((5, 5), 0.2), rtol=0, atol=1e-15)

    def test_two_by_two_against_long_run(self):
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        out = kl_bistochastic_square(a)
        reference = sinkhorn_symmetric_loops(a, 10_000)
        # frozen value of the long run: rows already have equal sums
        np.testing.assert_allclose(reference, [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], atol=1e-12)
        np.testing.assert_allclose(out.matrix, reference, atol=1e-6)
        np.testing.assert_allclose(out.matrix.sum(axis=1), 1.0, atol=1e-6)

    def test_matches_loop_oracle(self, rng):
        a = random_symmetric(rng, 6)
        out = kl_bistochastic_square(a, tol=1e-13, max_sweeps=10_000)
        np.testing.assert_allclose(out.matrix, sinkhorn_symmetric_loops(a, 2000), atol=1e-10)

    def test_zero_row_raises(self):
        a = np.array([[1.0, 0.0], [0.0, 0.0]])
        with pytest.raises(NumericalError, match="row 1"):
            kl_bistochastic_square(a)

    def test_asymmetric_raises(self):
        with pytest.raises(ValidationError, match="symmetric"):
            kl_bistochastic_square(np.array([[1.0, 2.0], [0.5, 1.0]]))

    def test_idempotent(self, rng):
        k = kl_bistochastic_square(random_symmetric(rng, 8), tol=1e-12).matrix
        again = kl_bistochastic_square(k, tol=1e-12).matrix
        np.testing.assert_allclose(again, k, atol=1e-6)

    def test_monotone_residual(self, rng):
        for _ in range(10):
            a = random_symmetric(rng, 12, zero_frac=0.3)
            res = [kl_bistochastic_square(a, tol=1e-300, max_sweeps=s).residual for s in range(1, 25)]
            assert all(r2 <= r1 * (1 + 1e-9) + 1e-15 for r1, r2 in zip(res[1:], res[2:]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 50), st.integers(0, 2**31 - 1), st.sampled_from([0.0, 0.3, 0.6]))
    def test_invariants_random(self, n, seed, zero_frac):
        a = random_symmetric(np.random.default_rng(seed), n, zero_frac)
        k = kl_bistochastic_square(a).matrix
        assert (k >= 0).all()
        assert np.abs(k.sum(axis=1) - 1).max() <= 10 * TOL
        assert np.abs(k - k.T).max() <= 10 * TOL
        assert (k[a == 0] == 0).all()


class TestGram:
    def test_matches_dense(self, rng):
        for _ in range(5):
            m = (rng.random((20, 9)) < 0.4).astype(float)
            m[np.arange(20), rng.integers(0, 9, 20)] = 1.0
            dense = kl_bistochastic_square(m @ m.T, tol=1e-12).matrix
            gram = kl_bistochastic_gram(m, tol=1e-12)
            np.testing.assert_allclose(gram.matrix.toarray(), dense, atol=1e-9)

    def test_residual_matches_dense_residual(self, rng):
        m = rng.random((10, 4))
        for sweeps in (1, 2, 5):
            dense = kl_bistochastic_square(m @ m.T, tol=1e-300, max_sweeps=sweeps)
            gram = kl_bistochastic_gram(m, tol=1e-300, max_sweeps=sweeps)
            np.testing.assert_allclose(gram.residual, dense.residual, rtol=1e-6, atol=1e-13)

    def test_kernel_operations(self, rng):
        u = rng.random((7, 3))
        k = GramKernel(u)
        dense = u @ u.T
        x = rng.random((7, 2))
        np.testing.assert_allclose(k @ x, dense @ x)
        np.testing.assert_allclose(k.sum(axis=1), dense.sum(axis=1))
        np.testing.assert_allclose(k.diagonal(), np.diag(dense))
        np.testing.assert_allclose(np.asarray(k), dense)
        assert k.shape == (7, 7)


class TestRectangular:
    def test_single_column(self):
        out = kl_bistochastic_rectangular(np.ones((5, 1)))
        np.testing.assert_array_equal(out.matrix, np.ones((5, 1)))

    def test_hand_example_against_long_run(self):
        a = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        out = kl_bistochastic_rectangular(a)
        ref = sinkhorn_rect_loops(a, np.full(3, 2 / 3), 10_000)
        # frozen value: the unique scaling with these supports and sums
        np.testing.assert_allclose(ref, [[2 / 3, 0, 1 / 3], [0, 2 / 3, 1 / 3]], atol=1e-12)
        np.testing.assert_allclose(out.matrix, ref, atol=1e-6)
        np.testing.assert_allclose(out.matrix.sum(axis=1), 1.0, atol=1e-6)
        np.testing.assert_allclose(out.matrix.sum(axis=0), 2 / 3, atol=1e-6)

    def test_block_diagonal_preserved(self):
        a = np.zeros((4, 4))
        a[:2, :2] = [[1, 2], [3, 1]]
        a[2:, 2:] = [[2, 1], [1, 1]]
        k = kl_bistochastic_rectangular(a).matrix
        assert (k[:2, 2:] == 0).all() and (k[2:, :2] == 0).all()

    def test_zero_column_raises(self):
        with pytest.raises(NumericalError, match="column 1"):
            kl_bistochastic_rectangular(np.array([[1.0, 0.0], [1.0, 0.0]]))

    def test_custom_targets(self, rng):
        a = rng.random((6, 3)) + 0.1
        t = np.array([1.0, 2.0, 3.0])
        k = kl_bistochastic_rectangular(a, tol=1e-12, col_targets=t).matrix
        np.testing.assert_allclose(k.sum(axis=0), t, atol=1e-9)
        np.testing.assert_allclose(k.sum(axis=1), 1.0, atol=1e-12)

    def test_bad_targets(self):
        with pytest.raises(ValidationError):
            kl_bistochastic_rectangular(np.ones((3, 2)), col_targets=np.array([1.0, 1.0]))

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(1, 8)), elements=st.floats(0.05, 4.0)))
    def test_rows_always_stochastic(self, a):
        k = kl_bistochastic_rectangular(a).matrix
        np.testing.assert_allclose(k.sum(axis=1), 1.0, atol=1e-12)
        n, g = a.shape
        np.testing.assert_allclose(k.sum(axis=0), n / g, atol=10 * TOL)


class TestColumnNormalize:
    def test_hand_example(self):
        b = column_normalize(np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]))
        np.testing.assert_array_equal(b, [[1, 0, 0.5], [0, 1, 0.5]])

    def test_four_members(self):
        b = column_normalize(np.ones((4, 1)))
        np.testing.assert_array_equal(b, np.full((4, 1), 0.25))

    def test_singleton(self):
        b = column_normalize(np.array([[1.0, 1.0], [0.0, 1.0]]))
        assert b[0, 0] == 1.0
        assert (b[1, 0] == 0.0) and np.isclose(b[:, 1].sum(), 1.0)

    def test_zero_column(self):
        with pytest.raises(NumericalError):
            column_normalize(np.array([[1.0, 0.0]]))
