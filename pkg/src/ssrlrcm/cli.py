"""Command-line entry point: ``ssrlrcm {synthetic,forestfires,gridsearch,hmatrix-bench}``.

Exit codes: 0 success, 1 usage error, 2 runtime or solver failure.
"""

import argparse
import copy
import json
import logging
import sys
import time

import numpy as np

from . import _backend
from .bench import ExperimentConfig, emit_report, grid_search, run_experiment
from .errors import ConfigError, SSRError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

SCENARIO_DEFAULTS = {
    "synthetic": {"scenario": "synthetic", "ensemble": {"r": 10, "k_range": [2]}, "baseline": {"family": "rbf", "lengthscale": 4.47}},
    "forestfires": {"scenario": "forestfires", "ensemble": {"r": 10, "k_range": [10]}, "baseline": {"family": "rbf", "lengthscale": 0.1}},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _experiment_flags(p):
    p.add_argument("--config", help="JSON file mirroring ExperimentConfig; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--sigma-eps", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--ensemble-size", type=int)
    p.add_argument("--k", type=_ints, help="cluster count(s) for the K-means ensemble, e.g. 2 or 2,3,4")
    p.add_argument("--ell", type=float, help="RBF baseline lengthscale")
    p.add_argument("--seed", type=int)
    p.add_argument("--dense-cap", type=int)
    p.add_argument("--data", help="path to forestfires.csv")
    p.add_argument("--labeled-fraction", type=float)
    p.add_argument("--jobs", type=int, help="repetitions run concurrently")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--out", help="write the report here instead of stdout")


def build_parser():
    parser = _Parser(prog="ssrlrcm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, helptext in (
        ("synthetic", "two-Gaussian mixture Monte Carlo benchmark"),
        ("forestfires", "Forest Fires quartile regression"),
    ):
        _experiment_flags(sub.add_parser(name, help=helptext))

    g = sub.add_parser("gridsearch", help="cross-validated alpha/beta selection")
    g.add_argument("--scenario", choices=("synthetic", "forestfires"), default="synthetic")
    g.add_argument("--alphas", type=_floats, default=[0.5, 1.0])
    g.add_argument("--betas", type=_floats, default=[0.001])
    g.add_argument("--folds", type=int, default=5)
    g.add_argument("--method", choices=("lrcm", "rbf"), default="lrcm")
    _experiment_flags(g)

    h = sub.add_parser("hmatrix-bench", help="H-matrix approximation error and timing on a grid")
    h.add_argument("--n", type=int, default=1024, help="number of grid points (rounded to a square)")
    h.add_argument("--nu", type=float, default=1.5)
    h.add_argument("--ell", type=float, default=0.25)
    h.add_argument("--variance", type=float, default=1.0)
    h.add_argument("--ranks", type=_ints, default=[5, 10, 20, 30])
    h.add_argument("--eps", type=float, default=1e-7)
    h.add_argument("--n-min", type=int, default=64)
    h.add_argument("--eta", type=float, default=2.0)
    h.add_argument("--iters", type=int, default=100)
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--dump-structure", help="write the leaf-block listing (JSON) of the eps build here")
    h.add_argument("--format", choices=("table", "json", "csv"), default="table")
    h.add_argument("--out")
    return parser


def _deep_merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def config_from_args(args, scenario):
    cfg = copy.deepcopy(SCENARIO_DEFAULTS[scenario])
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = _deep_merge(cfg, json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        cfg["scenario"] = scenario
    flat = {
        "n": args.n,
        "sigma_eps": args.sigma_eps,
        "repetitions": args.reps,
        "seed": args.seed,
        "dense_cap": args.dense_cap,
        "data_path": args.data,
        "labeled_fraction": args.labeled_fraction,
        "n_jobs": args.jobs,
    }
    cfg.update({k: v for k, v in flat.items() if v is not None})
    solver = dict(cfg.get("solver", {}))
    if args.alpha is not None:
        solver["alpha"] = args.alpha
    if args.beta is not None:
        solver["beta"] = args.beta
    cfg["solver"] = solver
    ens = dict(cfg.get("ensemble", {}))
    if args.ensemble_size is not None:
        ens["r"] = args.ensemble_size
    if args.k is not None:
        ens["k_range"] = args.k
    cfg["ensemble"] = ens
    if args.ell is not None:
        cfg["baseline"] = dict(cfg.get("baseline", {}), lengthscale=args.ell)
    try:
        return ExperimentConfig.from_dict(cfg)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _write(text, path):
    if path:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _hmatrix_bench(args):
    from .hmatrix import approx_error_norm, build_hmatrix
    from .kernels import matern, similarity_matrix
    from .numerics import power_iteration_norm

    side = max(1, int(round(np.sqrt(args.n))))
    g = np.linspace(0.0, 1.0, side)
    X = np.array([(a, b) for a in g for b in g])
    p = matern(args.nu, args.ell, args.variance)
    W = similarity_matrix(X, p)
    wnorm = power_iteration_norm(W, args.iters, args.seed)
    rows = []
    builds = [(k, 1e-14, "accept") for k in args.ranks] + [(None, args.eps, "densify")]
    last = None
    for k, eps, policy in builds:
        Ht = build_hmatrix(X, p, n_min=args.n_min, eta=args.eta, eps=eps, k_max=k or 10**6, on_rank_cap=policy)
        t0 = time.perf_counter()
        err = approx_error_norm(W, Ht, args.iters, args.seed)
        stats = Ht.rank_stats()
        rows.append({
            "rank_cap": k,
            "eps": eps if k is None else None,
            "err_2norm": err,
            "rel_err": err / wnorm,
            "build_s": Ht.build_time,
            "err_s": time.perf_counter() - t0,
            "storage_mb": Ht.storage() * 8 / 2**20,
            "max_rank": stats["max_rank"],
            "mean_rank": stats["mean_rank"],
        })
        last = Ht
    if args.dump_structure:
        with open(args.dump_structure, "w") as fh:
            fh.write(last.dump_structure("json"))
    meta = {"n": X.shape[0], "nu": args.nu, "ell": args.ell, "W_2norm": wnorm}
    if args.format == "json":
        return json.dumps({**meta, "rows": rows}, indent=2)
    keys = list(rows[0])
    if args.format == "csv":
        lines = [",".join(keys)] + [",".join("" if r[k] is None else repr(r[k]) for k in keys) for r in rows]
        return "\n".join(lines)
    lines = [f"n = {meta['n']}, Matern nu = {args.nu}, ell = {args.ell}, ||W||_2 ~ {wnorm:.4g}"]
    lines.append(f"{'rank_cap':>9}{'eps':>9}{'||W-W~||_2':>13}{'relative':>11}{'build_s':>9}{'MB':>8}{'max_rank':>9}")
    for r in rows:
        lines.append(
            f"{str(r['rank_cap'] or '-'):>9}{(format(r['eps'], '.0e') if r['eps'] else '-'):>9}"
            f"{r['err_2norm']:>13.3e}{r['rel_err']:>11.2e}{r['build_s']:>9.2f}{r['storage_mb']:>8.2f}{r['max_rank']:>9}"
        )
    return "\n".join(lines)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger(__name__).info("kernel backend: %s", _backend.NAME)
    try:
        if args.command == "hmatrix-bench":
            _write(_hmatrix_bench(args), args.out)
            return EXIT_OK
        scenario = args.scenario if args.command == "gridsearch" else args.command
        cfg = config_from_args(args, scenario)
        if args.command == "gridsearch":
            best, scores = grid_search(cfg, args.alphas, args.betas, folds=args.folds, method=args.method, return_scores=True)
            if args.format == "json":
                text = json.dumps({
                    "best": {"alpha": best[0], "beta": best[1]},
                    "scores": [{"alpha": a, "beta": b, "cv_rmse": s} for (a, b), s in sorted(scores.items())],
                }, indent=2)
            elif args.format == "csv":
                text = "\n".join(["alpha,beta,cv_rmse"] + [f"{a!r},{b!r},{s!r}" for (a, b), s in sorted(scores.items())])
            else:
                text = "\n".join(
                    [f"{'alpha':>10}{'beta':>10}{'cv_rmse':>12}"]
                    + [f"{a:>10g}{b:>10g}{s:>12.5f}" for (a, b), s in sorted(scores.items())]
                    + [f"best: alpha = {best[0]:g}, beta = {best[1]:g}"]
                )
            _write(text, args.out)
            return EXIT_OK
        report = run_experiment(cfg)
        _write(emit_report(report, args.format), args.out)
        failed = [r.index for r in report.repetitions if r.status_lrcm != "ok"]
        return EXIT_RUNTIME if len(failed) == len(report.repetitions) else EXIT_OK
    except (UsageError, ConfigError) as exc:
        print(f"ssrlrcm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SSRError, OSError, ArithmeticError) as exc:
        print(f"ssrlrcm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
