"""K-means cluster ensembles and the factored co-association matrix.

The weighted co-association matrix of r partitions,
``H(i, j) = sum_l w_l [c_l(i) == c_l(j)]``, is never formed. It is kept as
``H = B B^T`` with ``B = [sqrt(w_1) A_1, ..., sqrt(w_r) A_r]`` where ``A_l``
is the one-hot assignment matrix of partition l, together with the degree
vector ``D'_i = sum_l w_l |cluster of i in partition l|``.
"""

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import _backend
from .errors import DimensionMismatch, KTooLarge, TooLarge

DENSE_CAP = 2000


class Weighting(enum.Enum):
    UNIFORM = "uniform"
    VALIDITY_INDEX = "validity"


@dataclass(frozen=True, eq=False)
class Partition:
    labels: np.ndarray
    K: int
    inertia: float = 0.0
    n_iter: int = 0
    inertia_history: tuple = ()

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise DimensionMismatch("labels must be a vector")
        if labels.size and (labels.min() < 0 or labels.max() >= self.K):
            raise ValueError(f"labels must lie in [0, {self.K})")
        if labels.size and np.any(np.bincount(labels, minlength=self.K) == 0):
            raise ValueError("partition has an empty cluster")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels):
        """Partition from arbitrary hashable labels, compressed to 0..K-1."""
        _, inv = np.unique(np.asarray(labels), return_inverse=True)
        inv = inv.ravel()
        return cls(inv, int(inv.max()) + 1 if inv.size else 0)

    @property
    def n(self):
        return self.labels.shape[0]

    def sizes(self):
        return np.bincount(self.labels, minlength=self.K)


@dataclass(frozen=True)
class EnsembleConfig:
    r: int = 10
    k_range: tuple = (2,)
    max_iter: int = 100
    seed: int = 0
    weighting: Weighting = Weighting.UNIFORM
    refine: bool = True

    def __post_init__(self):
        ks = self.k_range
        if isinstance(ks, (int, np.integer)):
            ks = (int(ks),)
        ks = tuple(sorted(set(int(k) for k in ks)))
        object.__setattr__(self, "k_range", ks)
        object.__setattr__(self, "weighting", Weighting(self.weighting))
        if self.r < 1:
            raise ValueError("ensemble size r must be >= 1")
        if not ks or min(ks) < 1:
            raise ValueError("cluster counts must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def as_dict(self):
        return {
            "r": self.r,
            "k_range": list(self.k_range),
            "max_iter": self.max_iter,
            "seed": self.seed,
            "weighting": self.weighting.value,
            "refine": self.refine,
        }


def _finalize(X, labels, K):
    counts = np.bincount(labels, minlength=K)
    sums = np.zeros((K, X.shape[1]))
    np.add.at(sums, labels, X)
    C = sums / counts[:, None]
    resid = X - C[labels]
    return C, float(np.einsum("ij,ij->", resid, resid))


def kmeans(X, K, seed=0, max_iter=100, refine=True):
    """K-means from K distinct data points chosen uniformly at random.

    Lloyd iterations run until the assignment no longer changes or
    ``max_iter`` passes are spent. A cluster that empties is re-seeded with
    the point currently farthest from its own centroid, so every partition
    keeps exactly K nonempty clusters.

    With ``refine`` the Lloyd fixed point is then polished by single-point
    transfers (Hartigan's rule): a point changes cluster whenever that
    strictly lowers the within-cluster sum of squares. Lloyd alone can stop
    in either of two configurations that differ by one boundary point; in an
    ensemble such a point links two clusters in the co-association matrix.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if K > n:
        raise KTooLarge(f"K = {K} exceeds the number of points n = {n}")
    if K < 1:
        raise ValueError("K must be >= 1")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    C = X[rng.choice(n, size=K, replace=False)].copy()
    step = _backend.kernels.lloyd_step

    prev = None
    history = []
    it = 0
    while it < max_iter:
        it += 1
        labels, sums, counts, inertia, dist2 = step(X, C)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            dist2 = dist2.copy()
            for j in empty:
                # never strip a cluster down to nothing
                sizes = np.bincount(labels, minlength=K)
                cand = np.where(sizes[labels] > 1, dist2, -1.0)
                i = int(np.argmax(cand))
                C[j] = X[i]
                dist2[i] = -1.0
                labels[i] = j
            history.append(inertia)
            prev = None
            continue
        history.append(inertia)
        if prev is not None and np.array_equal(labels, prev):
            break
        C = sums / counts[:, None]
        prev = labels
    if refine and K > 1:
        C, _ = _finalize(X, labels, K)
        counts = np.bincount(labels, minlength=K).astype(np.int64)
        labels = np.ascontiguousarray(labels, dtype=np.int64)
        for _ in range(max_iter):
            if _backend.kernels.hartigan_pass(X, labels, C, counts) == 0:
                break
            C, sse = _finalize(X, labels, K)
            history.append(sse)
    C, final = _finalize(X, labels, K)
    return Partition(labels, K, final, it, tuple(history))


def _member_seed(seed, l):
    return int(np.random.SeedSequence([int(seed), int(l)]).generate_state(1)[0])


def generate_ensemble(X, cfg, n_jobs=1):
    """r independent seeded K-means partitions.

    Member l uses its own derived seed, and the cluster counts are drawn
    from a separate generator, so serial and threaded runs agree exactly.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if len(cfg.k_range) == 1:
        ks = [cfg.k_range[0]] * cfg.r
    else:
        krng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 0x4B52]))
        ks = [int(k) for k in krng.choice(np.array(cfg.k_range), size=cfg.r)]

    def member(l):
        return kmeans(X, ks[l], seed=_member_seed(cfg.seed, l), max_iter=cfg.max_iter, refine=cfg.refine)

    if n_jobs == 1:
        return [member(l) for l in range(cfg.r)]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(member, range(cfg.r)))


def compute_weights(partitions, weighting=Weighting.UNIFORM):
    """Ensemble weights summing to one.

    ``VALIDITY_INDEX`` scores each partition by ``1 / (1 + inertia)`` and
    normalises.
    """
    r = len(partitions)
    if r < 1:
        raise ValueError("need at least one partition")
    weighting = Weighting(weighting)
    if weighting is Weighting.UNIFORM:
        return np.full(r, 1.0 / r)
    gamma = np.array([1.0 / (1.0 + p.inertia) for p in partitions])
    return gamma / gamma.sum()


@dataclass(frozen=True, eq=False)
class EnsembleFactor:
    """Co-association matrix stored as ``B`` (n x m, one nonzero per row and block) plus degrees."""

    labels: np.ndarray  # (n, r) local cluster labels
    sizes: tuple  # K_l per partition
    weights: np.ndarray
    degrees: np.ndarray
    cols: np.ndarray = field(repr=False)  # (n, r) global column index into B
    scale: np.ndarray = field(repr=False)  # sqrt(w_l)

    @property
    def n(self):
        return self.labels.shape[0]

    @property
    def r(self):
        return self.labels.shape[1]

    @property
    def m(self):
        return int(sum(self.sizes))

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)

    @property
    def blocks(self):
        """The scaled assignment blocks ``B_l`` as sparse n x K_l matrices."""
        out = []
        rows = np.arange(self.n)
        for l, K in enumerate(self.sizes):
            data = np.full(self.n, self.scale[l])
            out.append(sp.csr_matrix((data, (rows, self.labels[:, l])), shape=(self.n, K)))
        return out

    @property
    def B(self):
        return sp.hstack(self.blocks, format="csr")

    def matvec_B(self, z):
        return _backend.kernels.factor_matvec(self.cols, self.scale, np.ascontiguousarray(z, dtype=np.float64))

    def rmatvec_B(self, x):
        return _backend.kernels.factor_rmatvec(
            self.cols, self.scale, np.ascontiguousarray(x, dtype=np.float64), self.m
        )

    def weighted_gram(self, s):
        """Dense ``B^T diag(s) B`` (m x m)."""
        return _backend.kernels.cross_gram(self.cols, self.scale, np.ascontiguousarray(s, dtype=np.float64), self.m)

    def nbytes(self):
        return self.labels.nbytes + self.cols.nbytes + self.degrees.nbytes + self.weights.nbytes


def build_factor(partitions, weights):
    """Assemble ``B`` and ``D'`` without forming the n x n co-association matrix."""
    weights = np.asarray(weights, dtype=np.float64)
    if len(partitions) != weights.shape[0]:
        raise DimensionMismatch(f"{len(partitions)} partitions but {weights.shape[0]} weights")
    if len(partitions) == 0:
        raise ValueError("need at least one partition")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be nonnegative and sum to 1")
    n = partitions[0].n
    if any(p.n != n for p in partitions):
        raise DimensionMismatch("partitions cover different numbers of points")
    labels = np.ascontiguousarray(np.column_stack([p.labels for p in partitions]), dtype=np.int64)
    sizes = tuple(int(p.K) for p in partitions)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    cols = np.ascontiguousarray(labels + offsets[None, :])
    degrees = np.zeros(n)
    for l, p in enumerate(partitions):
        degrees += weights[l] * p.sizes()[p.labels]
    labels.setflags(write=False)
    cols.setflags(write=False)
    return EnsembleFactor(labels, sizes, weights.copy(), degrees, cols, np.sqrt(weights))


def dense_coassociation(partitions, weights):
    """Reference n x n co-association matrix by direct indicator sums (n <= 2000)."""
    weights = np.asarray(weights, dtype=np.float64)
    n = partitions[0].n
    if n > DENSE_CAP:
        raise TooLarge(f"dense co-association limited to n <= {DENSE_CAP}, got {n}")
    H = np.zeros((n, n))
    for w, p in zip(weights, partitions):
        H += w * (p.labels[:, None] == p.labels[None, :])
    return H


def factor_gram_apply(F, x):
    """``H x = B (B^T x)`` in O(n m)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (F.n,):
        raise DimensionMismatch(f"vector has shape {x.shape}, factor has n = {F.n}")
    return F.matvec_B(F.rmatvec_B(x))
