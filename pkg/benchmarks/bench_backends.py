"""Time the compiled and pure-numpy inner loops on identical inputs.

    python benchmarks/bench_backends.py [--n 100000] [--repeat 5]

Each kernel is timed on both backends (best of ``--repeat``), outputs are
compared, and an end-to-end ensemble + Woodbury solve is timed by swapping
the active backend.
"""

import argparse
import time

import numpy as np

from ssrlrcm import _backend
from ssrlrcm.core import LabeledProblem, SolverConfig, solve_woodbury
from ssrlrcm.ensemble import EnsembleConfig, build_factor, compute_weights, generate_ensemble
from ssrlrcm.kernels import Family


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(n, rng):
    X = rng.standard_normal((n, 2))
    C = X[rng.choice(n, 10, replace=False)].copy()
    labels = rng.integers(0, 10, size=n)
    labels[:10] = np.arange(10)
    r, K = 10, 10
    cols = np.ascontiguousarray(rng.integers(0, K, size=(n, r)) + K * np.arange(r)[None, :], dtype=np.int64)
    scale = np.full(r, np.sqrt(1.0 / r))
    s = rng.random(n)
    Xs = rng.random((2000, 2))

    def hartigan(k):
        lab = labels.astype(np.int64).copy()
        counts = np.bincount(lab, minlength=10).astype(np.int64)
        Cm = np.array([X[lab == j].mean(axis=0) for j in range(10)])
        return lambda: k.hartigan_pass(X, lab.copy(), Cm.copy(), counts.copy())

    return {
        f"lloyd_step (n={n}, K=10)": lambda k: (lambda: k.lloyd_step(X, C)[0]),
        f"hartigan_pass (n={n}, K=10)": hartigan,
        f"cross_gram (n={n}, m=100)": lambda k: (lambda: k.cross_gram(cols, scale, s, r * K)),
        "kernel_matrix (n=2000, Matern 3/2)": lambda k: (lambda: k.kernel_matrix(Xs, int(Family.MATERN32), 0.25, 1.0)),
    }


def end_to_end(n, rng):
    X = rng.standard_normal((n, 2))
    prob = LabeledProblem.from_labels(rng.standard_normal(n // 10), n)

    def run():
        parts = generate_ensemble(X, EnsembleConfig(r=10, k_range=(2,)))
        return solve_woodbury(build_factor(parts, compute_weights(parts)), prob, SolverConfig(1.0, 0.001)).f

    return run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names = _backend.available()
    if "cython" not in names:
        print("compiled extension not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<38}" + "".join(f"{b + ' [s]':>14}" for b in names) + f"{'speedup':>10}{'agree':>8}")
    rows = list(cases(args.n, rng).items())
    for label, make in rows:
        times, outs = [], []
        for b in names:
            t, out = best_of(make(_backend.get(b)), args.repeat)
            times.append(t)
            outs.append(np.asarray(out))
        agree = all(np.allclose(o, outs[0], rtol=1e-12, atol=1e-12) for o in outs)
        speed = times[-1] / times[0] if len(times) > 1 else 1.0
        print(f"{label:<38}" + "".join(f"{t:>14.4f}" for t in times) + f"{speed:>9.1f}x{str(agree):>8}")

    run = end_to_end(args.n, rng)
    saved = _backend.kernels
    times, outs = [], []
    try:
        for b in names:
            _backend.kernels = _backend.get(b)
            t, out = best_of(run, max(1, args.repeat // 2))
            times.append(t)
            outs.append(out)
    finally:
        _backend.kernels = saved
    agree = all(np.allclose(o, outs[0], rtol=1e-10, atol=1e-12) for o in outs)
    speed = times[-1] / times[0] if len(times) > 1 else 1.0
    print(f"{f'ensemble + Woodbury solve (n={args.n})':<38}" + "".join(f"{t:>14.4f}" for t in times) + f"{speed:>9.1f}x{str(agree):>8}")


if __name__ == "__main__":
    main()
