import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import gauss_solve, jacobi_eigenvalues
from ssrlrcm.errors import DimensionMismatch, NotConverged, NotPositiveDefinite, SingularMatrix
from ssrlrcm.numerics import (
    LinearOperator,
    LowRankFactor,
    as_operator,
    cholesky_solve,
    conjugate_gradient,
    lu_solve,
    power_iteration_norm,
)


def spd(rng, n):
    M = rng.standard_normal((n, n))
    return M.T @ M + np.eye(n)


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky_solve(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_diagonal(self):
        np.testing.assert_allclose(cholesky_solve(np.diag([2.0, 4.0]), [2.0, 4.0]), [1.0, 1.0], rtol=0, atol=1e-15)

    def test_random_spd_against_gauss_elimination(self, rng):
        A = spd(rng, 20)
        b = rng.standard_normal(20)
        x = cholesky_solve(A, b)
        ref = gauss_solve(A, b)
        assert np.max(np.abs(A @ x - b)) <= 1e-8 * (1 + np.max(np.abs(b)))
        np.testing.assert_allclose(x, ref, rtol=1e-9, atol=1e-12)

    def test_indefinite_raises(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky_solve(np.diag([1.0, -1.0]), [1.0, 1.0])

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            cholesky_solve(np.array([[2.0, 1.0], [0.0, 2.0]]), [1.0, 1.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cholesky_solve(np.eye(3), [1.0, 2.0])


class TestLU:
    def test_permutation(self):
        np.testing.assert_array_equal(lu_solve(np.array([[0.0, 1.0], [1.0, 0.0]]), [3.0, 5.0]), [5.0, 3.0])

    def test_identity(self, rng):
        b = rng.standard_normal(7)
        np.testing.assert_array_equal(lu_solve(np.eye(7), b), b)

    def test_random_nonsingular_residual(self, rng):
        A = rng.standard_normal((15, 15)) + 3 * np.eye(15)
        b = rng.standard_normal(15)
        x = lu_solve(A, b)
        assert np.max(np.abs(A @ x - b)) <= 1e-9
        np.testing.assert_allclose(x, gauss_solve(A, b), rtol=1e-9, atol=1e-12)

    def test_singular_raises(self):
        with pytest.raises(SingularMatrix):
            lu_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), [1.0, 1.0])
        with pytest.raises(SingularMatrix):
            lu_solve(np.zeros((3, 3)), np.ones(3))

    @pytest.mark.parametrize("n", [2, 5, 12, 30])
    def test_agrees_with_cholesky_on_spd(self, rng, n):
        A = spd(rng, n)
        b = rng.standard_normal(n)
        x1, x2 = cholesky_solve(A, b), lu_solve(A, b)
        assert np.linalg.norm(x1 - x2) <= 1e-8 * np.linalg.norm(x1)


class TestConjugateGradient:
    def test_identity_one_iteration(self):
        e1 = np.zeros(6)
        e1[0] = 1.0
        x, it = conjugate_gradient(np.eye(6), e1, tol=1e-12, return_iterations=True)
        np.testing.assert_array_equal(x, e1)
        assert it == 1

    def test_diagonal_inverse(self):
        A = np.diag(np.arange(1.0, 11.0))
        x = conjugate_gradient(A, np.ones(10), tol=1e-12)
        np.testing.assert_allclose(x, 1.0 / np.arange(1.0, 11.0), rtol=1e-11)

    def test_laplacian_system_matches_cholesky(self, rng):
        from ssrlrcm.core import build_g_diagonal, graph_laplacian

        X = rng.standard_normal((50, 3))
        W = np.exp(-0.5 * np.sum((X[:, None] - X[None]) ** 2, axis=-1))
        A = np.diag(build_g_diagonal(50, 5, 0.001)) + 1.0 * graph_laplacian(W)
        b = np.zeros(50)
        b[:5] = rng.standard_normal(5)
        tol = 1e-10
        x_cg = conjugate_gradient(A, b, tol=tol)
        x_ch = cholesky_solve(A, b)
        assert np.linalg.norm(x_cg - x_ch) <= 1e-8 * np.linalg.norm(x_ch)
        # residual contract
        assert np.linalg.norm(A @ x_cg - b) <= tol * np.linalg.norm(b)

    def test_jacobi_preconditioning_helps_badly_scaled_diagonal(self, rng):
        d = np.logspace(0, 6, 200)
        A = np.diag(d) + 1e-3 * np.ones((200, 200))
        b = rng.standard_normal(200)
        x1, it1 = conjugate_gradient(A, b, jacobi=False, return_iterations=True, max_iter=5000)
        x2, it2 = conjugate_gradient(A, b, jacobi=True, return_iterations=True)
        assert it2 < it1
        np.testing.assert_allclose(x1, x2, rtol=1e-7, atol=1e-12)

    def test_not_converged_reports_residual(self, rng):
        A = spd(rng, 40)
        with pytest.raises(NotConverged) as info:
            conjugate_gradient(A, rng.standard_normal(40), tol=1e-14, max_iter=2)
        assert info.value.residual > 1e-14
        assert info.value.iterations == 2

    def test_indefinite_operator_detected(self):
        with pytest.raises(NotPositiveDefinite):
            conjugate_gradient(np.diag([1.0, -1.0]), np.array([0.0, 1.0]))

    def test_zero_rhs(self):
        np.testing.assert_array_equal(conjugate_gradient(np.eye(4), np.zeros(4)), np.zeros(4))

    def test_accepts_linear_operator(self):
        op = LinearOperator(3, lambda x: 2.0 * x, np.full(3, 2.0))
        np.testing.assert_allclose(conjugate_gradient(op, np.ones(3), jacobi=True), 0.5)


class TestPowerIteration:
    def test_identity_exact(self):
        assert power_iteration_norm(np.eye(5)) == 1.0

    def test_dominant_diagonal(self):
        assert abs(power_iteration_norm(np.diag([3.0, 1.0, 0.5]), 50) - 3.0) <= 1e-6

    def test_zero_operator(self):
        assert power_iteration_norm(np.zeros((4, 4))) == 0.0

    def test_random_symmetric_against_jacobi(self, rng):
        M = rng.standard_normal((30, 30))
        S = M + M.T
        ref = np.max(np.abs(jacobi_eigenvalues(S)))
        est = power_iteration_norm(S, iters=2000, seed=3)
        assert abs(est - ref) <= 1e-4 * ref
        assert est <= ref * (1 + 1e-12)

    def test_monotone_in_iterations(self, rng):
        M = rng.standard_normal((25, 25))
        S = M + M.T
        vals = [power_iteration_norm(S, k, seed=1) for k in range(1, 60)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_iters_validated(self):
        with pytest.raises(ValueError):
            power_iteration_norm(np.eye(2), 0)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 20), st.integers(0, 10_000))
    def test_never_exceeds_true_norm(self, n, seed):
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((n, n))
        S = M + M.T
        assert power_iteration_norm(S, 30, seed) <= np.linalg.norm(S, 2) * (1 + 1e-12)


class TestTypes:
    def test_low_rank_factor(self, rng):
        U, V = rng.standard_normal((6, 2)), rng.standard_normal((2, 4))
        F = LowRankFactor(U, V)
        assert F.rank == 2 and F.shape == (6, 4)
        x = rng.standard_normal(4)
        np.testing.assert_allclose(F.matvec(x), U @ V @ x)
        y = rng.standard_normal(6)
        np.testing.assert_allclose(F.rmatvec(y), (U @ V).T @ y)
        assert LowRankFactor.empty(3, 5).to_dense().shape == (3, 5)

    def test_low_rank_factor_rejects_bad_shapes(self):
        with pytest.raises(DimensionMismatch):
            LowRankFactor(np.zeros((3, 2)), np.zeros((3, 4)))

    def test_as_operator_requires_square(self):
        with pytest.raises(DimensionMismatch):
            as_operator(np.zeros((2, 3)))
