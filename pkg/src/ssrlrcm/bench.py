"""Monte Carlo experiment harness: SSR-LRCM against the dense RBF baseline."""

import csv
import enum
import io
import json
import logging
import math
import resource
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import data as data_mod
from .core import LabeledProblem, SolverConfig, SolverPath, solve_dense, solve_woodbury
from .ensemble import EnsembleConfig, Partition, build_factor, compute_weights, generate_ensemble
from .errors import ConfigError, DegenerateDifferences, DimensionMismatch, SSRError
from .kernels import Family, KernelParams, similarity_matrix

log = logging.getLogger(__name__)

DENSE_CAP = 20_000
DENSE_INFEASIBLE = "DenseInfeasible"


def rmse(f, y_true):
    f = np.asarray(f, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if f.shape != y_true.shape:
        raise DimensionMismatch(f"prediction shape {f.shape} vs truth {y_true.shape}")
    if f.size == 0:
        raise ValueError("rmse of an empty vector")
    d = y_true - f
    return float(np.sqrt(np.mean(d * d)))


# -- Student t distribution ---------------------------------------------------

_TINY = 1e-300


def _betacf(a, b, x, max_iter=10_000, eps=1e-16):
    # modified Lentz evaluation of the incomplete-beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = _TINY if abs(d) < _TINY else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(a, b, x):
    """Regularized incomplete beta ``I_x(a, b)``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t, df):
    """``P(|T| >= |t|)`` for Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    t2 = t * t
    # q = P(|T| < |t|); for small |t| the direct argument df / (df + t^2)
    # rounds towards 1, so evaluate whichever of p, q is below one half
    q = betainc_regularized(0.5, df / 2.0, t2 / (df + t2))
    if q < 0.5:
        return 1.0 - q
    return betainc_regularized(df / 2.0, 0.5, df / (df + t2))


def paired_t_test(a, b):
    """Two-sided paired t-test of ``mean(a - b) == 0``; returns (t, p)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch("paired samples must be vectors of equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateDifferences("all paired differences are identical")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    return t, t_sf_two_sided(t, n - 1)


# -- configuration -------------------------------------------------------------


class Scenario(enum.Enum):
    SYNTHETIC = "synthetic"
    FOREST_FIRES = "forestfires"


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario = Scenario.SYNTHETIC
    n: int = 1000
    sigma_eps: float = 0.01
    repetitions: int = 40
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    baseline: KernelParams = field(default_factory=lambda: KernelParams(Family.RBF, 4.47))
    labeled_fraction: float = 0.1
    seed: int = 0
    alpha_grid: tuple | None = None
    beta_grid: tuple | None = None
    dense_cap: int = DENSE_CAP
    d: int = 8
    sigma_x: float = 5.0
    a1: float = 0.0
    a2: float = 10.0
    data_path: str | None = None
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.scenario is Scenario.SYNTHETIC and self.n < 2:
            raise ConfigError("n must be >= 2")
        if not 0 < self.labeled_fraction < 1:
            raise ConfigError("labeled fraction must lie in (0, 1)")
        if self.sigma_eps < 0:
            raise ConfigError("sigma_eps must be >= 0")
        if self.scenario is Scenario.FOREST_FIRES and not self.data_path:
            raise ConfigError("the forestfires scenario needs a data path")
        for name in ("alpha_grid", "beta_grid"):
            g = getattr(self, name)
            if g is not None:
                g = tuple(float(v) for v in g)
                if not g:
                    raise ConfigError(f"{name} must not be empty")
                object.__setattr__(self, name, g)
        if self.beta_grid is not None and min(self.beta_grid) <= 0:
            raise ConfigError("beta candidates must be > 0")
        if self.alpha_grid is not None and min(self.alpha_grid) < 0:
            raise ConfigError("alpha candidates must be >= 0")

    @classmethod
    def synthetic_default(cls, n=1000, sigma_eps=0.01, **kw):
        return cls(Scenario.SYNTHETIC, n, sigma_eps, **kw)

    @classmethod
    def forest_fires_default(cls, data_path, **kw):
        kw.setdefault("ensemble", EnsembleConfig(r=10, k_range=(10,)))
        kw.setdefault("baseline", KernelParams(Family.RBF, 0.1))
        return cls(Scenario.FOREST_FIRES, 0, 0.0, data_path=data_path, **kw)

    def to_dict(self):
        return {
            "scenario": self.scenario.value,
            "n": self.n,
            "sigma_eps": self.sigma_eps,
            "repetitions": self.repetitions,
            "ensemble": self.ensemble.as_dict(),
            "solver": self.solver.as_dict(),
            "baseline": self.baseline.as_dict(),
            "labeled_fraction": self.labeled_fraction,
            "seed": self.seed,
            "alpha_grid": list(self.alpha_grid) if self.alpha_grid else None,
            "beta_grid": list(self.beta_grid) if self.beta_grid else None,
            "dense_cap": self.dense_cap,
            "d": self.d,
            "sigma_x": self.sigma_x,
            "a1": self.a1,
            "a2": self.a2,
            "data_path": self.data_path,
            "n_jobs": self.n_jobs,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "ensemble" in d and isinstance(d["ensemble"], dict):
            e = dict(d["ensemble"])
            if "k_range" in e:
                e["k_range"] = tuple(e["k_range"]) if isinstance(e["k_range"], (list, tuple)) else (e["k_range"],)
            d["ensemble"] = EnsembleConfig(**e)
        if "solver" in d and isinstance(d["solver"], dict):
            d["solver"] = SolverConfig(**d["solver"])
        if "baseline" in d and isinstance(d["baseline"], dict):
            d["baseline"] = KernelParams(**d["baseline"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


# -- experiment ----------------------------------------------------------------


@dataclass
class RepetitionResult:
    index: int
    n: int
    rmse_lrcm: float | None = None
    t_ens: float | None = None
    t_matr: float | None = None
    rmse_rbf: float | None = None
    time_rbf: float | None = None
    status_lrcm: str = "ok"
    status_rbf: str = "ok"
    n_labeled: int = 0


@dataclass
class ExperimentReport:
    config: dict
    repetitions: list = field(default_factory=list)
    mean_rmse_lrcm: float | None = None
    mean_rmse_rbf: float | None = None
    mean_t_ens: float | None = None
    mean_t_matr: float | None = None
    mean_time_rbf: float | None = None
    t_statistic: float | None = None
    p_value: float | None = None
    peak_memory_estimate: int = 0
    peak_rss: int = 0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["repetitions"] = [RepetitionResult(**r) for r in d.get("repetitions", [])]
        return cls(**d)


def _rep_seeds(seed, index):
    ss = np.random.SeedSequence([int(seed), int(index)])
    return [int(s) for s in ss.generate_state(3)]


def _load_forest(cfg):
    ds = data_mod.load_forest_fires(cfg.data_path)
    return ds.with_features(data_mod.minmax_scale(ds.X)).with_response(data_mod.quartile_transform(ds.y_true))


def _problem_for_rep(cfg, index, base=None):
    data_seed, split_seed, ens_seed = _rep_seeds(cfg.seed, index)
    if cfg.scenario is Scenario.SYNTHETIC:
        ds = data_mod.generate_mixture(cfg.n, cfg.d, cfg.sigma_x, cfg.sigma_eps, data_seed, cfg.a1, cfg.a2)
    else:
        ds = base
    return data_mod.split_labeled(ds, cfg.labeled_fraction, split_seed), ens_seed


def run_lrcm(X, prob, ens_cfg, solver):
    """SSR-LRCM end to end: ensemble, factor, Woodbury solve.

    Returns (prediction, t_ens, t_matr, factor).
    """
    t0 = time.perf_counter()
    parts = generate_ensemble(X, ens_cfg)
    F = build_factor(parts, compute_weights(parts, ens_cfg.weighting))
    t1 = time.perf_counter()
    pred = solve_woodbury(F, prob, solver.with_path(SolverPath.WOODBURY))
    t2 = time.perf_counter()
    return pred, t1 - t0, t2 - t1, F


def run_rbf(X, prob, kernel, solver):
    t0 = time.perf_counter()
    W = similarity_matrix(X, kernel)
    pred = solve_dense(W, prob, solver.with_path(SolverPath.DENSE_RBF))
    return pred, time.perf_counter() - t0


def _one_repetition(cfg, index, base):
    split, ens_seed = _problem_for_rep(cfg, index, base)
    ds = split.dataset
    res = RepetitionResult(index, ds.n, n_labeled=split.n1)
    try:
        pred, res.t_ens, res.t_matr, _ = run_lrcm(ds.X, split.problem, replace(cfg.ensemble, seed=ens_seed), cfg.solver)
        res.rmse_lrcm = rmse(pred.f, ds.y_true)
    except SSRError as exc:
        log.warning("repetition %d: SSR-LRCM failed: %s", index, exc)
        res.status_lrcm = f"{type(exc).__name__}: {exc}"
    if ds.n > cfg.dense_cap:
        res.status_rbf = DENSE_INFEASIBLE
    else:
        try:
            pred, res.time_rbf = run_rbf(ds.X, split.problem, cfg.baseline, cfg.solver)
            res.rmse_rbf = rmse(pred.f, ds.y_true)
        except (SSRError, MemoryError) as exc:
            log.warning("repetition %d: SSR-RBF failed: %s", index, exc)
            res.status_rbf = f"{type(exc).__name__}: {exc}"
    return res


def memory_estimate(n, d, r, m, dense):
    """Rough peak bytes: data, ensemble labels/factor, Woodbury core, optional dense W and L."""
    est = 8 * n * d + 2 * 8 * n * r + 8 * m * m + 8 * 6 * n
    if dense:
        est += 2 * 8 * n * n
    return int(est)


def _mean(vals):
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def summarize(cfg_dict, reps, dense_cap=DENSE_CAP, d=None, r=None, m=None):
    reps = sorted(reps, key=lambda x: x.index)
    rep = ExperimentReport(cfg_dict, reps)
    rep.mean_rmse_lrcm = _mean([x.rmse_lrcm for x in reps])
    rep.mean_rmse_rbf = _mean([x.rmse_rbf for x in reps])
    rep.mean_t_ens = _mean([x.t_ens for x in reps])
    rep.mean_t_matr = _mean([x.t_matr for x in reps])
    rep.mean_time_rbf = _mean([x.time_rbf for x in reps])
    pairs = [(x.rmse_lrcm, x.rmse_rbf) for x in reps if x.rmse_lrcm is not None and x.rmse_rbf is not None]
    if len(pairs) >= 2:
        a, b = map(np.array, zip(*pairs))
        try:
            rep.t_statistic, rep.p_value = paired_t_test(a, b)
        except DegenerateDifferences:
            pass
    if reps:
        n = max(x.n for x in reps)
        rep.peak_memory_estimate = memory_estimate(n, d or 1, r or 1, m or 1, n <= dense_cap)
    rep.peak_rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024
    return rep


def run_experiment(cfg):
    """All repetitions of one benchmark row; failures are recorded, not raised."""
    base = _load_forest(cfg) if cfg.scenario is Scenario.FOREST_FIRES else None
    if cfg.n_jobs == 1:
        reps = [_one_repetition(cfg, i, base) for i in range(cfg.repetitions)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.n_jobs) as pool:
            reps = list(pool.map(lambda i: _one_repetition(cfg, i, base), range(cfg.repetitions)))
    d = base.X.shape[1] if base is not None else cfg.d + 2
    m = cfg.ensemble.r * max(cfg.ensemble.k_range)
    return summarize(cfg.to_dict(), reps, cfg.dense_cap, d, cfg.ensemble.r, m)


# -- grid search -----------------------------------------------------------------


def _kfold(n1, folds, seed):
    rng = np.random.default_rng(seed)
    order = rng.permutation(n1)
    return [np.sort(order[k::folds]) for k in range(min(folds, n1))]


def grid_search(cfg, alpha_list=None, beta_list=None, folds=5, method="lrcm", return_scores=False):
    """Pick (alpha, beta) by k-fold cross-validation on the labeled points.

    One dataset/split is drawn (repetition 0 seeds). For every fold the
    held-out labeled points are treated as unlabeled and scored against
    their observed labels. Ties go to the larger beta, then the larger alpha.
    """
    alpha_list = tuple(alpha_list if alpha_list is not None else (cfg.alpha_grid or (cfg.solver.alpha,)))
    beta_list = tuple(beta_list if beta_list is not None else (cfg.beta_grid or (cfg.solver.beta,)))
    if not alpha_list or not beta_list:
        raise ConfigError("grid lists must be nonempty")
    if min(beta_list) <= 0:
        raise ConfigError("beta candidates must be > 0")
    if len(alpha_list) == 1 and len(beta_list) == 1:
        best = (float(alpha_list[0]), float(beta_list[0]))
        return (best, {}) if return_scores else best

    base = _load_forest(cfg) if cfg.scenario is Scenario.FOREST_FIRES else None
    split, ens_seed = _problem_for_rep(cfg, 0, base)
    ds, n1, n = split.dataset, split.n1, split.dataset.n
    y_lab = ds.y_obs[:n1]
    if method == "lrcm":
        parts = generate_ensemble(ds.X, replace(cfg.ensemble, seed=ens_seed))
        weights = compute_weights(parts, cfg.ensemble.weighting)
    else:
        W = similarity_matrix(ds.X, cfg.baseline)

    fold_data = []
    for held in _kfold(n1, folds, ens_seed):
        keep = np.setdiff1d(np.arange(n1), held)
        order = np.concatenate([keep, held, np.arange(n1, n)])
        prob = LabeledProblem.from_labels(y_lab[keep], n)
        if method == "lrcm":
            sub = [Partition(p.labels[order], p.K) for p in parts]
            fold_data.append((build_factor(sub, weights), prob, keep.size, held))
        else:
            fold_data.append((W[np.ix_(order, order)], prob, keep.size, held))

    scores = {}
    for a in alpha_list:
        for b in beta_list:
            solver = SolverConfig(a, b)
            errs = []
            for op, prob, k, held in fold_data:
                f = solve_woodbury(op, prob, solver).f if method == "lrcm" else solve_dense(op, prob, solver).f
                errs.append(rmse(f[k : k + held.size], y_lab[held]))
            scores[(float(a), float(b))] = float(np.mean(errs))
    best = min(scores, key=lambda ab: (scores[ab], -ab[1], -ab[0]))
    return (best, scores) if return_scores else best


# -- reporting -------------------------------------------------------------------

TABLE_COLUMNS = ("n", "sigma_eps", "RMSE_LRCM", "t_ens", "t_matr", "RMSE_RBF", "time_RBF", "p-value")
CSV_COLUMNS = ("rep", "n", "sigma_eps", "rmse_lrcm", "t_ens", "t_matr", "rmse_rbf", "time_rbf")


def _fmt(v, spec):
    if v is None:
        return "-"
    return format(v, spec)


def emit_report(rep, fmt="table"):
    """Render a report as an aligned table, JSON or per-repetition CSV."""
    sigma = rep.config.get("sigma_eps")
    if fmt == "json":
        return json.dumps(rep.to_dict(), indent=2, sort_keys=True)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for x in rep.repetitions:
            rbf_rmse = x.rmse_rbf if x.rmse_rbf is not None else (x.status_rbf if x.status_rbf != "ok" else "")
            w.writerow([
                x.index, x.n, sigma,
                "" if x.rmse_lrcm is None else repr(x.rmse_lrcm),
                "" if x.t_ens is None else repr(x.t_ens),
                "" if x.t_matr is None else repr(x.t_matr),
                rbf_rmse if isinstance(rbf_rmse, str) else repr(rbf_rmse),
                "" if x.time_rbf is None else repr(x.time_rbf),
            ])
        return buf.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown report format {fmt!r}")
    header = "".join(f"{c:>12}" for c in TABLE_COLUMNS)
    lines = [header, "-" * len(header)]
    if rep.repetitions:
        n = max(x.n for x in rep.repetitions)
        infeasible = all(x.status_rbf == DENSE_INFEASIBLE for x in rep.repetitions)
        cells = [
            str(n),
            _fmt(sigma, "g"),
            _fmt(rep.mean_rmse_lrcm, ".4f"),
            _fmt(rep.mean_t_ens, ".3f"),
            _fmt(rep.mean_t_matr, ".3f"),
            DENSE_INFEASIBLE if infeasible else _fmt(rep.mean_rmse_rbf, ".4f"),
            "-" if infeasible else _fmt(rep.mean_time_rbf, ".3f"),
            _fmt(rep.p_value, ".2e"),
        ]
        lines.append("".join(f"{c:>12}" for c in cells))
        failed = [x.index for x in rep.repetitions if x.status_lrcm != "ok"]
        if failed:
            lines.append(f"failed SSR-LRCM repetitions: {failed}")
    return "\n".join(lines)
