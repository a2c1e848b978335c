"""Datasets: the two-Gaussian mixture, Forest Fires ingestion, labeled splits."""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import LabeledProblem
from .errors import DimensionMismatch, EmptyLabeledSet, MissingColumn, ParseError

log = logging.getLogger(__name__)

FOREST_FEATURES = ("X", "Y", "FFMC", "DMC", "ISI", "DC", "temp", "RH", "wind", "rain")
FOREST_RESPONSE = "area"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with responses.

    ``y_true`` is the ground truth used for scoring. ``y_obs`` is what a
    labeler would observe; for the synthetic mixture it carries the
    response noise, for real data it equals ``y_true``.
    """

    X: np.ndarray
    y_true: np.ndarray
    y_obs: np.ndarray = None
    component: np.ndarray | None = None
    feature_names: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y_true, dtype=np.float64)
        y_obs = y if self.y_obs is None else np.asarray(self.y_obs, dtype=np.float64)
        if X.shape[0] != y.shape[0] or y_obs.shape != y.shape:
            raise DimensionMismatch(f"X has {X.shape[0]} rows, responses have {y.shape[0]}/{y_obs.shape[0]}")
        if self.component is not None and np.asarray(self.component).shape != y.shape:
            raise DimensionMismatch("component ids do not match the number of rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y)) and np.all(np.isfinite(y_obs))):
            raise ValueError("dataset contains non-finite values")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DimensionMismatch(f"{len(names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y_true", y)
        object.__setattr__(self, "y_obs", y_obs)
        if self.component is not None:
            object.__setattr__(self, "component", np.asarray(self.component, dtype=np.int64))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self):
        return self.X.shape[0]

    def take(self, idx):
        idx = np.asarray(idx)
        comp = None if self.component is None else self.component[idx]
        return Dataset(self.X[idx], self.y_true[idx], self.y_obs[idx], comp, self.feature_names)

    def with_features(self, X):
        return Dataset(X, self.y_true, self.y_obs, self.component, self.feature_names)

    def with_response(self, y):
        return Dataset(self.X, y, y, self.component, self.feature_names)

    def describe(self):
        if self.n == 0:
            return {"n": 0}
        return {
            "n": self.n,
            "ranges": {nm: (float(lo), float(hi)) for nm, lo, hi in zip(self.feature_names, self.X.min(0), self.X.max(0))},
            "response": (float(self.y_true.min()), float(self.y_true.max())),
        }


@dataclass(frozen=True, eq=False)
class SplitProblem:
    dataset: Dataset  # labeled rows first
    n1: int
    perm: np.ndarray  # perm[i] = original row of permuted row i
    problem: LabeledProblem = field(repr=False)


def generate_mixture(n, d=8, sigma_x=5.0, sigma_eps=0.01, seed=0, a1=0.0, a2=10.0, n_noise=2):
    """Equal-weight mixture of N(a1, sigma_x^2 I) and N(a2, sigma_x^2 I) in R^d.

    ``sigma_x`` is a standard deviation. Responses are 1 (first
    component) or 2 (second) plus N(0, sigma_eps^2) noise in ``y_obs``;
    ``y_true`` holds the noise-free component value. ``n_noise`` extra
    U(0, sigma_x) columns are appended.
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    comp = rng.integers(1, 3, size=n)
    centers = np.stack([np.broadcast_to(np.asarray(a1, dtype=float), (d,)), np.broadcast_to(np.asarray(a2, dtype=float), (d,))])
    X = centers[comp - 1] + sigma_x * rng.standard_normal((n, d))
    noise = rng.uniform(0.0, sigma_x, size=(n, n_noise))
    eps = sigma_eps * rng.standard_normal(n) if sigma_eps > 0 else np.zeros(n)
    names = tuple(f"g{j}" for j in range(d)) + tuple(f"u{j}" for j in range(n_noise))
    y = comp.astype(np.float64)
    return Dataset(np.hstack([X, noise]), y, y + eps, comp, names)


def split_labeled(ds, fraction=0.1, seed=0):
    """Random labeled subset, stratified by component when ids exist.

    Each stratum contributes ``ceil(fraction * n_c)`` points. The returned
    dataset is reordered labeled-first (each part in original order).
    """
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n = ds.n
    strata = [np.arange(n)] if ds.component is None else [np.flatnonzero(ds.component == c) for c in np.unique(ds.component)]
    chosen = []
    for idx in strata:
        k = math.ceil(fraction * idx.size)
        if k:
            chosen.append(rng.choice(idx, size=k, replace=False))
    labeled = np.sort(np.concatenate(chosen)) if chosen else np.array([], dtype=np.int64)
    if labeled.size == 0:
        raise EmptyLabeledSet("no labeled points selected")
    mask = np.zeros(n, dtype=bool)
    mask[labeled] = True
    perm = np.concatenate([labeled, np.flatnonzero(~mask)])
    out = ds.take(perm)
    n1 = labeled.size
    return SplitProblem(out, n1, perm, LabeledProblem.from_labels(out.y_obs[:n1], n))


def _parse_float(text, row, column):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"cannot parse {text!r} as a number", row=row, column=column) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value {text!r}", row=row, column=column)
    return v


def _read_columns(path, wanted):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("empty file, no header row") from None
        missing = [c for c in wanted if c not in header]
        if missing:
            raise MissingColumn(f"missing column(s) {missing} in {path}")
        pos = [header.index(c) for c in wanted]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(rec)}", row=lineno)
            rows.append([_parse_float(rec[p], lineno, c) for p, c in zip(pos, wanted)])
    return np.array(rows, dtype=np.float64).reshape(len(rows), len(wanted))


def load_forest_fires(path):
    """UCI ``forestfires.csv``: the ten numeric predictors and burned area.

    The month/day text columns are dropped.
    """
    vals = _read_columns(path, FOREST_FEATURES + (FOREST_RESPONSE,))
    ds = Dataset(vals[:, :-1], vals[:, -1], feature_names=FOREST_FEATURES)
    info = ds.describe()
    log.info("loaded %d rows from %s", ds.n, path)
    for name, (lo, hi) in info.get("ranges", {}).items():
        log.debug("  %-5s [%g, %g]", name, lo, hi)
    return ds


def save_dataset(ds, path):
    """CSV with the feature columns, ``y_true``, ``y_obs`` and optional ``component``."""
    cols = list(ds.feature_names) + ["y_true", "y_obs"] + (["component"] if ds.component is not None else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.X[i]] + [repr(float(ds.y_true[i])), repr(float(ds.y_obs[i]))]
            if ds.component is not None:
                row.append(str(int(ds.component[i])))
            w.writerow(row)


def load_dataset(path):
    with open(path, newline="") as fh:
        header = [h.strip() for h in next(csv.reader(fh))]
    has_comp = "component" in header
    feats = tuple(h for h in header if h not in ("y_true", "y_obs", "component"))
    vals = _read_columns(path, feats + ("y_true", "y_obs") + (("component",) if has_comp else ()))
    k = len(feats)
    comp = vals[:, k + 2].astype(np.int64) if has_comp else None
    return Dataset(vals[:, :k], vals[:, k], vals[:, k + 1], comp, feats)


def minmax_scale(X):
    """Scale each column to [0, 1]; constant columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (X - lo) / span


def quartile_transform(y):
    """Quartile index in {1, 2, 3, 4} of ``log(1 + y)``.

    Cut points are the empirical 25/50/75% quantiles (linear
    interpolation); a value equal to a cut point falls in the lower bucket.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.size == 0:
        raise ValueError("quartile_transform needs a nonempty vector")
    z = np.log1p(y)
    cuts = np.quantile(z, [0.25, 0.5, 0.75])
    return 1.0 + (z[:, None] > cuts[None, :]).sum(axis=1)
