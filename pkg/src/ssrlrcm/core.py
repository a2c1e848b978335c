"""Graph-Laplacian regularised transductive regression solvers.

All solvers minimise

    1/2 * ( sum_{labeled} (f_i - y_i)^2 + alpha * sum_ij w_ij (f_i - f_j)^2 + beta * |f|^2 )

whose stationarity condition is ``(G + alpha L) f = Y10`` with ``G`` diagonal
(``beta + 1`` on labeled points, ``beta`` elsewhere) and ``Y10`` the labels
padded with zeros. Labeled points must come first.
"""

import enum
import time
from dataclasses import dataclass

import numpy as np

from .errors import AsymmetricInput, DimensionMismatch, SingularCore, SingularMatrix
from .numerics import cholesky_solve, lu_solve


class SolverPath(enum.Enum):
    DENSE_RBF = "dense-rbf"
    DENSE_ENSEMBLE = "dense-ensemble"
    WOODBURY = "woodbury"
    HMATRIX_CG = "hmatrix-cg"


@dataclass(frozen=True)
class SolverConfig:
    """Regularisation pair and solver path.

    ``alpha = 0`` is accepted (it decouples the problem into a diagonal
    solve); ``beta`` must be strictly positive.
    """

    alpha: float = 1.0
    beta: float = 0.001
    path: SolverPath = SolverPath.WOODBURY

    def __post_init__(self):
        object.__setattr__(self, "path", SolverPath(self.path))
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not (np.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be > 0, got {self.beta}")

    def with_path(self, path):
        return SolverConfig(self.alpha, self.beta, path)

    def as_dict(self):
        return {"alpha": self.alpha, "beta": self.beta, "path": self.path.value}


@dataclass(frozen=True, eq=False)
class LabeledProblem:
    n: int
    n1: int
    y_padded: np.ndarray

    def __post_init__(self):
        y = np.ascontiguousarray(self.y_padded, dtype=np.float64)
        if y.shape != (self.n,):
            raise DimensionMismatch(f"y_padded has shape {y.shape}, expected ({self.n},)")
        if not 1 <= self.n1 <= self.n:
            raise ValueError(f"need 1 <= n1 <= n, got n1={self.n1}, n={self.n}")
        if np.any(y[self.n1 :] != 0):
            raise ValueError("unlabeled tail of y_padded must be zero")
        if not np.all(np.isfinite(y)):
            raise ValueError("labels must be finite")
        y.setflags(write=False)
        object.__setattr__(self, "y_padded", y)

    @classmethod
    def from_labels(cls, y_labeled, n):
        y_labeled = np.asarray(y_labeled, dtype=np.float64)
        y = np.zeros(n)
        y[: y_labeled.shape[0]] = y_labeled
        return cls(n, y_labeled.shape[0], y)

    @property
    def y_labeled(self):
        return self.y_padded[: self.n1]


@dataclass(frozen=True, eq=False)
class Prediction:
    f: np.ndarray
    path_used: SolverPath
    solve_time: float
    info: dict | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.f)):
            raise ArithmeticError("solver produced non-finite predictions")


def build_g_diagonal(n, n1, beta):
    if not 1 <= n1 <= n:
        raise ValueError(f"need 1 <= n1 <= n, got n1={n1}, n={n}")
    g = np.full(n, float(beta))
    g[:n1] += 1.0
    return g


def graph_laplacian(W):
    """``L = D - W`` with ``D = diag(row sums)``."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionMismatch(f"similarity matrix must be square, got {W.shape}")
    scale = np.max(np.abs(W)) if W.size else 0.0
    if scale > 0 and np.max(np.abs(W - W.T)) > 1e-10 * scale:
        raise AsymmetricInput("similarity matrix is not symmetric")
    L = -W.copy()
    L[np.diag_indices_from(L)] += W.sum(axis=1)
    return L


def laplacian_quadform(W, f):
    """``sum_ij w_ij (f_i - f_j)^2`` by direct summation."""
    W = np.asarray(W, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    if W.shape != (f.shape[0], f.shape[0]):
        raise DimensionMismatch(f"W is {W.shape}, f has length {f.shape[0]}")
    diff = f[:, None] - f[None, :]
    return float(np.sum(W * diff * diff))


def _diagonal_solution(prob, cfg, path, t0):
    g = build_g_diagonal(prob.n, prob.n1, cfg.beta)
    return Prediction(prob.y_padded / g, path, time.perf_counter() - t0)


def solve_dense(W, prob, cfg):
    """Dense solve of ``(G + alpha L) f = Y10`` via Cholesky."""
    t0 = time.perf_counter()
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (prob.n, prob.n):
        raise DimensionMismatch(f"W is {W.shape}, problem has n = {prob.n}")
    path = cfg.path if cfg.path in (SolverPath.DENSE_RBF, SolverPath.DENSE_ENSEMBLE) else SolverPath.DENSE_RBF
    if cfg.alpha == 0:
        return _diagonal_solution(prob, cfg, path, t0)
    A = cfg.alpha * graph_laplacian(W)
    A[np.diag_indices_from(A)] += build_g_diagonal(prob.n, prob.n1, cfg.beta)
    f = cholesky_solve(A, prob.y_padded)
    return Prediction(f, path, time.perf_counter() - t0)


def solve_woodbury(F, prob, cfg):
    """Ensemble solve through the m x m Woodbury core.

    With ``S = G + alpha D'`` (diagonal) the prediction is

        f = S^-1 y + alpha S^-1 B (I - alpha B^T S^-1 B)^-1 B^T S^-1 y

    costing O(n m + m^3); nothing n x n is ever built.
    """
    t0 = time.perf_counter()
    if F.n != prob.n:
        raise DimensionMismatch(f"factor has n = {F.n}, problem has n = {prob.n}")
    if cfg.alpha == 0:
        return _diagonal_solution(prob, cfg, SolverPath.WOODBURY, t0)
    alpha = cfg.alpha
    s_inv = 1.0 / (build_g_diagonal(prob.n, prob.n1, cfg.beta) + alpha * F.degrees)
    u = s_inv * prob.y_padded
    core = -alpha * F.weighted_gram(s_inv)
    core[np.diag_indices_from(core)] += 1.0
    try:
        z = lu_solve(core, F.rmatvec_B(u))
    except SingularMatrix as exc:
        raise SingularCore(f"Woodbury core singular for alpha = {alpha}: {exc}", alpha=alpha) from None
    f = u + alpha * s_inv * F.matvec_B(z)
    return Prediction(f, SolverPath.WOODBURY, time.perf_counter() - t0, {"m": F.m})
