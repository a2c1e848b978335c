"""A small hierarchical-matrix toolkit for dense kernel matrices.

Points are ordered by a geometric bisection tree; the block tree pairs
clusters and stores far-field blocks (strong admissibility) as ACA low-rank
factors, near-field leaves as dense blocks. Only what the regression needs
is provided: assembly, matvec, error estimation and a CG solve. There is no
H-arithmetic (formatted addition, multiplication, Cholesky).

The block tree is built symmetrically: the block for (s, t) is the
transpose of the block for (t, s), so the approximant is exactly symmetric
and G + alpha * L~ stays a valid CG operator.
"""

import enum
import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .core import Prediction, SolverPath, build_g_diagonal
from .ensemble import EnsembleFactor, factor_gram_apply
from .errors import DimensionMismatch, RankCapReached
from .kernels import KernelParams, kernel_block
from .numerics import LinearOperator, LowRankFactor, conjugate_gradient, power_iteration_norm


@dataclass(eq=False)
class ClusterNode:
    start: int
    stop: int
    lo: np.ndarray
    hi: np.ndarray
    children: tuple = ()
    index: int = 0

    @property
    def size(self):
        return self.stop - self.start

    @property
    def is_leaf(self):
        return not self.children

    @property
    def box(self):
        return (self.lo, self.hi)


@dataclass(eq=False)
class ClusterTree:
    root: ClusterNode
    perm: np.ndarray  # tree position -> original index
    points: np.ndarray  # points in tree order
    n_min: int

    def nodes(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self):
        return [nd for nd in self.nodes() if nd.is_leaf]

    def depth(self):
        def d(node):
            return 0 if node.is_leaf else 1 + max(d(c) for c in node.children)

        return d(self.root)


def build_cluster_tree(X, n_min=64):
    """Binary tree splitting the longest bounding-box side at the median."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 1:
        raise ValueError("need at least one point")
    if n_min < 1:
        raise ValueError("n_min must be >= 1")
    perm = np.arange(n)
    counter = [0]

    def build(start, stop):
        idx = perm[start:stop]
        pts = X[idx]
        node = ClusterNode(start, stop, pts.min(axis=0), pts.max(axis=0), index=counter[0])
        counter[0] += 1
        size = stop - start
        if size > n_min:
            axis = int(np.argmax(node.hi - node.lo))
            order = np.argsort(pts[:, axis], kind="stable")
            perm[start:stop] = idx[order]
            mid = start + size // 2
            node.children = (build(start, mid), build(mid, stop))
        return node

    root = build(0, n)
    return ClusterTree(root, perm, np.ascontiguousarray(X[perm]), n_min)


def _box_diameter(box):
    lo, hi = box
    return float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))


def _box_distance(a, b):
    gap = np.maximum(0.0, np.maximum(np.asarray(b[0]) - np.asarray(a[1]), np.asarray(a[0]) - np.asarray(b[1])))
    return float(np.linalg.norm(gap))


def is_admissible(a, b, eta=2.0):
    """Strong admissibility: ``min(diam a, diam b) <= eta * dist(a, b)`` with a positive distance."""
    dist = _box_distance(a, b)
    if dist <= 0.0:
        return False
    return min(_box_diameter(a), _box_diameter(b)) <= eta * dist


def aca_approximate(get_row, get_col, nrows, ncols, eps=1e-7, k_max=50):
    """Partially pivoted adaptive cross approximation.

    ``get_row(i)`` and ``get_col(j)`` return one row/column of the block.
    Crosses are appended until the next one satisfies
    ``|u_k| |v_k| <= eps * |S_k|_F`` (that cross is the error estimate and
    is not stored). Raises RankCapReached, carrying the truncated factor,
    when ``k_max`` crosses are stored without meeting the criterion.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    us, vs = [], []
    frob2 = 0.0
    used_rows = np.zeros(nrows, dtype=bool)
    used_cols = np.zeros(ncols, dtype=bool)
    i = 0
    limit = min(nrows, ncols)
    converged = False
    while True:
        # residual row at pivot i; skip rows that are already exact
        row = np.array(get_row(i), dtype=np.float64)
        for u, v in zip(us, vs):
            row -= u[i] * v
        used_rows[i] = True
        cand = np.where(used_cols, 0.0, np.abs(row))
        j = int(np.argmax(cand))
        if cand[j] == 0.0:
            free = np.flatnonzero(~used_rows)
            if free.size == 0:
                converged = True
                break
            i = int(free[0])
            continue
        v = row / row[j]
        u = np.array(get_col(j), dtype=np.float64)
        for uu, vv in zip(us, vs):
            u -= vv[j] * uu
        used_cols[j] = True
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        cross2 = (nu * nv) ** 2
        new_frob2 = frob2 + cross2 + 2.0 * sum((uu @ u) * (vv @ v) for uu, vv in zip(us, vs))
        if us and nu * nv <= eps * np.sqrt(max(new_frob2, 0.0)):
            converged = True
            break
        us.append(u)
        vs.append(v)
        frob2 = new_frob2
        if len(us) >= limit:
            converged = True
            break
        if len(us) >= k_max:
            break
        cand = np.where(used_rows, -1.0, np.abs(u))
        i = int(np.argmax(cand))
        if cand[i] <= 0.0:
            free = np.flatnonzero(~used_rows)
            if free.size == 0:
                converged = True
                break
            i = int(free[0])
    if us:
        factor = LowRankFactor(np.column_stack(us), np.vstack(vs))
    else:
        factor = LowRankFactor.empty(nrows, ncols)
    if not converged:
        raise RankCapReached(k_max, factor)
    return factor


def aca_matrix(M, eps=1e-7, k_max=50):
    """ACA of an explicit array (convenience for tests and small blocks)."""
    M = np.asarray(M, dtype=np.float64)
    return aca_approximate(lambda i: M[i], lambda j: M[:, j], M.shape[0], M.shape[1], eps, k_max)


class BlockKind(enum.Enum):
    DENSE = "dense"
    LOWRANK = "lowrank"
    SUBDIVIDED = "subdivided"


@dataclass(eq=False)
class BlockNode:
    row: ClusterNode
    col: ClusterNode
    kind: BlockKind
    data: object = None  # ndarray, LowRankFactor, or None
    children: tuple = ()
    capped: bool = False

    @property
    def rank(self):
        if self.kind is BlockKind.LOWRANK:
            return self.data.rank
        if self.kind is BlockKind.DENSE:
            return min(self.row.size, self.col.size)
        return None

    def transposed(self):
        if self.kind is BlockKind.DENSE:
            data = self.data.T
        elif self.kind is BlockKind.LOWRANK:
            data = LowRankFactor(self.data.right.T, self.data.left.T)
        else:
            data = None
        kids = ()
        if self.children:
            a, b, c, d = self.children
            kids = (a.transposed(), c.transposed(), b.transposed(), d.transposed())
        return BlockNode(self.col, self.row, self.kind, data, kids, self.capped)

    def leaves(self):
        if self.kind is not BlockKind.SUBDIVIDED:
            yield self
            return
        for ch in self.children:
            yield from ch.leaves()


@dataclass(eq=False)
class HMatrix:
    root: BlockNode
    tree: ClusterTree
    kernel: KernelParams
    eps: float
    eta: float
    k_max: int
    build_time: float = 0.0
    _leaves: list = field(default=None, repr=False)

    @property
    def n(self):
        return self.tree.perm.shape[0]

    @property
    def perm(self):
        return self.tree.perm

    @property
    def shape(self):
        return (self.n, self.n)

    def leaves(self):
        if self._leaves is None:
            self._leaves = list(self.root.leaves())
        return self._leaves

    def matvec(self, x):
        return h_matvec(self, x)

    def __matmul__(self, x):
        return h_matvec(self, x)

    def diagonal(self):
        d = np.zeros(self.n)
        for lf in self.leaves():
            if lf.row is lf.col:
                d[lf.row.start : lf.row.stop] = np.diag(lf.data)
        out = np.empty(self.n)
        out[self.perm] = d
        return out

    def to_dense(self):
        """Assemble the approximant (original ordering); small n only."""
        Wp = np.zeros((self.n, self.n))
        for lf in self.leaves():
            blk = lf.data if lf.kind is BlockKind.DENSE else lf.data.to_dense()
            Wp[lf.row.start : lf.row.stop, lf.col.start : lf.col.stop] = blk
        out = np.empty_like(Wp)
        out[np.ix_(self.perm, self.perm)] = Wp
        return out

    def storage(self):
        """Number of stored float64 values (mirrored blocks counted once)."""
        total = 0
        for lf in self.leaves():
            if lf.row.start > lf.col.start:
                continue
            if lf.kind is BlockKind.DENSE:
                total += lf.data.size
            else:
                total += lf.data.left.size + lf.data.right.size
        return total

    def rank_stats(self):
        ranks = [lf.data.rank for lf in self.leaves() if lf.kind is BlockKind.LOWRANK]
        return {
            "n_leaves": len(self.leaves()),
            "n_dense": sum(lf.kind is BlockKind.DENSE for lf in self.leaves()),
            "n_lowrank": len(ranks),
            "max_rank": max(ranks) if ranks else 0,
            "mean_rank": float(np.mean(ranks)) if ranks else 0.0,
            "n_capped": sum(lf.capped for lf in self.leaves()),
        }

    def block_structure(self):
        """Leaf listing (tree-ordered index ranges) for inspection."""
        return [
            {
                "rows": [lf.row.start, lf.row.stop],
                "cols": [lf.col.start, lf.col.stop],
                "kind": lf.kind.value,
                "rank": lf.rank,
            }
            for lf in self.leaves()
        ]

    def dump_structure(self, fmt="json"):
        blocks = self.block_structure()
        if fmt == "json":
            return json.dumps({"n": self.n, "eps": self.eps, "eta": self.eta, "blocks": blocks}, indent=1)
        lines = ["row_start\trow_stop\tcol_start\tcol_stop\tkind\trank"]
        for b in blocks:
            lines.append(f"{b['rows'][0]}\t{b['rows'][1]}\t{b['cols'][0]}\t{b['cols'][1]}\t{b['kind']}\t{b['rank']}")
        return "\n".join(lines)


ON_CAP = ("densify", "accept", "raise")


def build_hmatrix(X, p, n_min=64, eta=2.0, eps=1e-7, k_max=50, on_rank_cap="densify"):
    """H-matrix approximation of the kernel matrix ``W(||x_i - x_j||)``.

    ``on_rank_cap`` decides what happens when ACA hits ``k_max`` on an
    admissible block: ``densify`` stores the exact block, ``accept`` keeps
    the truncated rank-``k_max`` factor, ``raise`` propagates RankCapReached.
    """
    if on_rank_cap not in ON_CAP:
        raise ValueError(f"on_rank_cap must be one of {ON_CAP}")
    t0 = time.perf_counter()
    tree = build_cluster_tree(X, n_min)
    P = tree.points

    def dense(t, s):
        if t is s:
            return _backend.kernels.kernel_matrix(P[t.start : t.stop], int(p.family), p.lengthscale, p.variance)
        return kernel_block(P[t.start : t.stop], P[s.start : s.stop], p)

    def lowrank(t, s):
        Pt, Ps = P[t.start : t.stop], P[s.start : s.stop]
        try:
            f = aca_approximate(
                lambda i: kernel_block(Pt[i : i + 1], Ps, p)[0],
                lambda j: kernel_block(Pt, Ps[j : j + 1], p)[:, 0],
                t.size,
                s.size,
                eps,
                k_max,
            )
            return BlockNode(t, s, BlockKind.LOWRANK, f)
        except RankCapReached as exc:
            if on_rank_cap == "raise":
                raise
            if on_rank_cap == "accept":
                return BlockNode(t, s, BlockKind.LOWRANK, exc.factor, capped=True)
            return BlockNode(t, s, BlockKind.DENSE, dense(t, s), capped=True)

    def block(t, s):
        if t is not s and is_admissible(t.box, s.box, eta):
            return lowrank(t, s)
        if t.is_leaf or s.is_leaf:
            return BlockNode(t, s, BlockKind.DENSE, dense(t, s))
        t1, t2 = t.children
        s1, s2 = s.children
        if t is s:
            b11, b12, b22 = block(t1, t1), block(t1, t2), block(t2, t2)
            kids = (b11, b12, b12.transposed(), b22)
        else:
            kids = (block(t1, s1), block(t1, s2), block(t2, s1), block(t2, s2))
        return BlockNode(t, s, BlockKind.SUBDIVIDED, None, kids)

    root = block(tree.root, tree.root)
    return HMatrix(root, tree, p, eps, eta, k_max, time.perf_counter() - t0)


def h_matvec(Ht, x):
    """``W~ x`` in the caller's ordering."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (Ht.n,):
        raise DimensionMismatch(f"vector has shape {x.shape}, H-matrix is {Ht.n}x{Ht.n}")
    xp = x[Ht.perm]
    yp = np.zeros(Ht.n)
    for lf in Ht.leaves():
        xs = xp[lf.col.start : lf.col.stop]
        if lf.kind is BlockKind.DENSE:
            yp[lf.row.start : lf.row.stop] += lf.data @ xs
        else:
            yp[lf.row.start : lf.row.stop] += lf.data.matvec(xs)
    y = np.empty(Ht.n)
    y[Ht.perm] = yp
    return y


class KernelOperator:
    """Exact kernel matrix available entrywise and by (chunked) matvec, never stored."""

    def __init__(self, X, p, chunk=256):
        X = np.asarray(X, dtype=np.float64)
        self.X = np.ascontiguousarray(X if X.ndim == 2 else X[:, None])
        self.p = p
        self.chunk = chunk

    @property
    def n(self):
        return self.X.shape[0]

    def entries(self, rows, cols):
        return kernel_block(self.X[rows], self.X[cols], self.p)

    def matvec(self, x):
        x = np.asarray(x, dtype=np.float64)
        y = np.empty(self.n)
        for s in range(0, self.n, self.chunk):
            e = min(self.n, s + self.chunk)
            y[s:e] = kernel_block(self.X[s:e], self.X, self.p) @ x
        return y

    def __matmul__(self, x):
        return self.matvec(x)


def _matvec_of(W):
    if isinstance(W, HMatrix):
        return W.n, lambda x: h_matvec(W, x)
    if isinstance(W, EnsembleFactor):
        return W.n, lambda x: factor_gram_apply(W, x)
    if isinstance(W, (KernelOperator, LinearOperator)):
        n = W.n if isinstance(W, KernelOperator) else W.dimension
        return n, W.matvec
    A = np.asarray(W, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"similarity must be square, got {A.shape}")
    return A.shape[0], lambda x: A @ x


def approx_error_norm(W, Ht, iters=50, seed=0):
    """Power-iteration estimate of ``||W - W~||_2``."""
    n, mv = _matvec_of(W)
    if n != Ht.n:
        raise DimensionMismatch(f"exact operator has n = {n}, approximant {Ht.n}")
    op = LinearOperator(n, lambda x: mv(x) - h_matvec(Ht, x))
    return power_iteration_norm(op, iters, seed)


def laplacian_operator(W):
    """``x -> D x - W x`` with degrees taken as ``W @ 1``."""
    n, mv = _matvec_of(W)
    degrees = mv(np.ones(n))
    return LinearOperator(n, lambda x: degrees * x - mv(x)), degrees


def laplacian_error_norm(W, Wt, iters=200, seed=0):
    """Power-iteration estimate of ``||L~ - L||_2``."""
    L, _ = laplacian_operator(W)
    Lt, _ = laplacian_operator(Wt)
    return power_iteration_norm(LinearOperator(L.dimension, lambda x: Lt.matvec(x) - L.matvec(x)), iters, seed)


def ssr_objective(W, prob, cfg, f):
    """``Q(f) = 1/2 (|f_lab - y|^2 + alpha * sum_ij w_ij (f_i - f_j)^2 + beta |f|^2)``."""
    L, _ = laplacian_operator(W)
    f = np.asarray(f, dtype=np.float64)
    fit = f[: prob.n1] - prob.y_labeled
    return 0.5 * (fit @ fit + cfg.alpha * 2.0 * (f @ L.matvec(f)) + cfg.beta * (f @ f))


def solve_ssr_hmatrix(Ht, prob, cfg, cg_tol=1e-10, max_iter=None, jacobi=False):
    """Solve ``(G + alpha L~) f = Y10`` by conjugate gradients.

    ``Ht`` is anything with a symmetric matvec: an HMatrix, an
    EnsembleFactor, a KernelOperator or a dense array.
    """
    t0 = time.perf_counter()
    n, mv = _matvec_of(Ht)
    if n != prob.n:
        raise DimensionMismatch(f"operator has n = {n}, problem has n = {prob.n}")
    g = build_g_diagonal(prob.n, prob.n1, cfg.beta)
    if cfg.alpha == 0:
        return Prediction(prob.y_padded / g, SolverPath.HMATRIX_CG, time.perf_counter() - t0)
    alpha = cfg.alpha
    degrees = mv(np.ones(n))
    diag = None
    if jacobi:
        if isinstance(Ht, HMatrix):
            wdiag = Ht.diagonal()
        elif isinstance(Ht, EnsembleFactor):
            wdiag = np.ones(n)
        elif isinstance(Ht, np.ndarray):
            wdiag = np.diag(Ht)
        else:
            wdiag = np.full(n, Ht.p.variance) if isinstance(Ht, KernelOperator) else None
        if wdiag is not None:
            diag = g + alpha * (degrees - wdiag)

    op = LinearOperator(n, lambda x: g * x + alpha * (degrees * x - mv(x)), diag)
    f, its = conjugate_gradient(
        op, prob.y_padded, tol=cg_tol, max_iter=max_iter, jacobi=diag is not None, return_iterations=True
    )
    return Prediction(f, SolverPath.HMATRIX_CG, time.perf_counter() - t0, {"cg_iterations": its})
