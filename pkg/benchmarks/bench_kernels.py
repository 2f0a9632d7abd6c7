"""Time the compiled kernels against their NumPy fallbacks.

Runs the two hot kernels on realistic workloads with both backends and
reports best-of-N wall times, speedups, and the numeric gap between the
implementations. Useful after touching either backend:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --quick
"""

import argparse
import time

import numpy as np

from pairforge._kernels import fallback

try:
    from pairforge._kernels import _ck
except ImportError:
    _ck = None


def best_of(repeats, fn, *args):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_acc(repeats, quick, rng):
    """Autocovariance over a corpus of per-residue descriptor matrices."""
    n_seqs = 60 if quick else 400
    max_lag = 5
    sequences = []
    for _ in range(n_seqs):
        length = int(rng.integers(50, 600))
        sequences.append(np.ascontiguousarray(rng.normal(size=(length, 5))))

    def run_all(impl):
        return np.concatenate([np.asarray(impl.acc_core(seq, max_lag))
                               for seq in sequences])

    rows = []
    py_time, py_out = best_of(repeats, run_all, fallback)
    rows.append(("acc_core", "python", py_time, 1.0, None))
    if _ck is not None:
        ck_time, ck_out = best_of(repeats, run_all, _ck)
        gap = float(np.max(np.abs(ck_out - py_out)))
        rows.append(("acc_core", "compiled", ck_time, py_time / ck_time, gap))
    return rows


def bench_cd(repeats, quick, rng):
    """A warm-started lambda path, the shape rule induction produces."""
    n = 500 if quick else 2000
    p = 150 if quick else 600
    x = rng.normal(size=(n, p))
    x = (x - x.mean(axis=0)) / x.std(axis=0)
    beta = np.zeros(p)
    beta[:10] = rng.uniform(0.5, 1.5, size=10)
    y = (rng.uniform(size=n)
         < 1.0 / (1.0 + np.exp(-(x @ beta)))).astype(float)
    xt = np.ascontiguousarray(x.T)
    lam_max = float(np.max(np.abs(xt @ (y - y.mean()) / n)))
    path = np.geomspace(lam_max, lam_max * 0.01, 10)

    def run_path(impl):
        w = np.zeros(p)
        bias = 0.0
        outs = []
        for lam in path:
            w, bias, _, _ = impl.cd_fit(xt, y, float(lam), w, bias, 200, 1e-6)
            w = np.asarray(w)
            outs.append(w.copy())
        return np.concatenate(outs)

    rows = []
    py_time, py_out = best_of(repeats, run_path, fallback)
    rows.append(("cd_fit", "python", py_time, 1.0, None))
    if _ck is not None:
        ck_time, ck_out = best_of(repeats, run_path, _ck)
        gap = float(np.max(np.abs(ck_out - py_out)))
        rows.append(("cd_fit", "compiled", ck_time, py_time / ck_time, gap))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3,
                        help="take the best of this many runs (default 3)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quick", action="store_true",
                        help="smaller workloads for a fast smoke run")
    args = parser.parse_args()

    if _ck is None:
        print("compiled extension not built; timing the fallback only\n")

    rng = np.random.default_rng(args.seed)
    rows = bench_acc(args.repeats, args.quick, rng)
    rows += bench_cd(args.repeats, args.quick, rng)

    print(f"{'kernel':<10} {'backend':<10} {'best time':>12} {'speedup':>9}"
          f"   {'max |diff|'}")
    for kernel, backend, seconds, speedup, gap in rows:
        gap_text = "" if gap is None else f"{gap:.2e}"
        print(f"{kernel:<10} {backend:<10} {seconds * 1e3:>10.1f}ms"
              f" {speedup:>8.1f}x   {gap_text}")


if __name__ == "__main__":
    main()
