"""Dense solves, conjugate gradients and power iteration.

Every routine works in float64. Dense factorizations are delegated to
LAPACK through scipy; the iterative methods are written out here because
they must run on anything that can do a matvec (dense arrays, the
co-association factor, H-matrices).
"""

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .errors import DimensionMismatch, NotConverged, NotPositiveDefinite, SingularMatrix

SYMMETRY_RTOL = 1e-10
PIVOT_RTOL = 1e-14


@dataclass(frozen=True)
class LowRankFactor:
    """``left @ right`` with ``left`` n x k and ``right`` k x n_cols."""

    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        if self.left.ndim != 2 or self.right.ndim != 2 or self.left.shape[1] != self.right.shape[0]:
            raise DimensionMismatch(f"factor shapes {self.left.shape} and {self.right.shape} do not chain")

    @property
    def rank(self):
        return self.left.shape[1]

    @property
    def shape(self):
        return (self.left.shape[0], self.right.shape[1])

    def to_dense(self):
        return self.left @ self.right

    def matvec(self, x):
        return self.left @ (self.right @ x)

    def rmatvec(self, x):
        return self.right.T @ (self.left.T @ x)

    @classmethod
    def empty(cls, nrows, ncols):
        return cls(np.zeros((nrows, 0)), np.zeros((0, ncols)))


@dataclass(frozen=True)
class LinearOperator:
    """Square operator known only through ``matvec``."""

    dimension: int
    matvec: Callable[[np.ndarray], np.ndarray]
    diagonal: np.ndarray | None = None

    def __call__(self, x):
        return self.matvec(x)

    def __matmul__(self, x):
        return self.matvec(x)


def as_operator(A):
    """Wrap a dense square array (or pass an operator through unchanged)."""
    if isinstance(A, LinearOperator):
        return A
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"operator must be square, got shape {A.shape}")
    return LinearOperator(A.shape[0], lambda x: A @ x, np.diag(A).copy())


def _check_system(A, b):
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got shape {A.shape}")
    if b.shape[0] != A.shape[0]:
        raise DimensionMismatch(f"rhs has length {b.shape[0]}, matrix is {A.shape[0]}x{A.shape[1]}")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite entries in linear system")
    return A, b


def cholesky_solve(A, b):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Raises NotPositiveDefinite when the factorization hits a non-positive
    pivot.
    """
    A, b = _check_system(A, b)
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale > 0 and np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * scale:
        raise ValueError("cholesky_solve requires a symmetric matrix")
    try:
        c = sla.cho_factor(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    return sla.cho_solve(c, b, check_finite=False)


def lu_solve(A, b):
    """Solve ``A x = b`` by LU with partial pivoting."""
    A, b = _check_system(A, b)
    norm_inf = np.max(np.sum(np.abs(A), axis=1)) if A.size else 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if norm_inf == 0.0 or pivots.min() < PIVOT_RTOL * norm_inf:
        raise SingularMatrix(
            f"pivot {pivots.min():.3e} below {PIVOT_RTOL:g} * ||A||_inf = {PIVOT_RTOL * norm_inf:.3e}"
        )
    return sla.lu_solve((lu, piv), b, check_finite=False)


def conjugate_gradient(A, b, tol=1e-10, max_iter=None, x0=None, jacobi=False, return_iterations=False):
    """Conjugate gradients for a symmetric positive definite operator.

    Stops once ``||A x - b||_2 <= tol * ||b||_2``. With ``jacobi=True`` the
    operator's diagonal is used as preconditioner.
    """
    A = as_operator(A)
    n = A.dimension
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise DimensionMismatch(f"rhs has shape {b.shape}, operator dimension is {n}")
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if bnorm == 0.0:
        return (np.zeros(n), 0) if return_iterations else np.zeros(n)
    target = tol * bnorm

    if jacobi:
        if A.diagonal is None:
            raise ValueError("jacobi preconditioning needs the operator diagonal")
        inv_diag = 1.0 / np.asarray(A.diagonal, dtype=np.float64)
    else:
        inv_diag = None

    r = b - A.matvec(x) if x0 is not None else b.copy()
    rnorm = np.linalg.norm(r)
    if rnorm <= target:
        return (x, 0) if return_iterations else x
    z = r * inv_diag if inv_diag is not None else r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A.matvec(p)
        pAp = p @ Ap
        if pAp <= 0.0:
            raise NotPositiveDefinite(f"operator not positive definite (p^T A p = {pAp:.3e})")
        step = rz / pAp
        x += step * p
        r -= step * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            return (x, it) if return_iterations else x
        z = r * inv_diag if inv_diag is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NotConverged(
        f"CG residual {rnorm / bnorm:.3e} (relative) after {max_iter} iterations",
        residual=rnorm / bnorm,
        iterations=max_iter,
    )


def power_iteration_norm(A, iters=50, seed=0):
    """Lower estimate of the spectral norm ``||A||_2``.

    Runs power iteration from a seeded random unit vector and returns the
    largest ``||A v||`` seen over unit iterates, so the estimate never
    exceeds the true norm and never decreases as ``iters`` grows.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    A = as_operator(A)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.dimension)
    v /= np.linalg.norm(v)
    best = 0.0
    for _ in range(iters):
        w = A.matvec(v)
        nw = np.linalg.norm(w)
        best = max(best, nw)
        if nw == 0.0:
            break
        v = w / nw
    return float(best)
