#!/usr/bin/env python3
"""Benchmark the scoring hot kernels: compiled extension vs NumPy fallback.

Times the two kernels behind score_trials (per-trial dot products and
per-utterance top-n cohort statistics) on a synthetic workload shaped like a
production scoring run, and checks both backends agree numerically.

Usage: python benchmarks/bench_scoring.py [--n-utts 2000] [--dim 256]
       [--cohort 400] [--n-trials 100000] [--top-n 400] [--repeats 3]
"""

import argparse
import time

import numpy as np

from svbackend import kernels
from svbackend.kernels import _cohort_stats_py, _pair_scores_py


def make_workload(rng, n_utts, dim, cohort_size, n_trials):
    unit = rng.standard_normal((n_utts, dim))
    unit /= np.linalg.norm(unit, axis=1, keepdims=True)
    cohort = rng.standard_normal((cohort_size, dim))
    cohort /= np.linalg.norm(cohort, axis=1, keepdims=True)
    ei = rng.integers(0, n_utts, n_trials).astype(np.int64)
    ti = rng.integers(0, n_utts, n_trials).astype(np.int64)
    return np.ascontiguousarray(unit), np.ascontiguousarray(cohort), ei, ti


def best_of(repeats, fn, *args):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-utts", type=int, default=2000)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--cohort", type=int, default=400)
    parser.add_argument("--n-trials", type=int, default=100000)
    parser.add_argument("--top-n", type=int, default=400)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    try:
        from svbackend import _core
    except ImportError:
        _core = None
    print(f"active backend: {kernels.backend_name()}")
    if _core is None:
        print("compiled extension not built; benchmarking the fallback only")

    rng = np.random.default_rng(args.seed)
    unit, cohort, ei, ti = make_workload(
        rng, args.n_utts, args.dim, args.cohort, args.n_trials
    )
    print(
        f"workload: {args.n_utts} utterances x {args.dim} dims, "
        f"cohort {args.cohort}, {args.n_trials} trials, top_n {args.top_n}"
    )

    t_pure, pairs_pure = best_of(args.repeats, _pair_scores_py, unit, ei, ti)
    print(f"pair_scores   pure:     {t_pure * 1e3:8.1f} ms "
          f"({args.n_trials / t_pure / 1e6:6.1f} M trials/s)")
    if _core is not None:
        t_ext, pairs_ext = best_of(args.repeats, _core.pair_scores, unit, ei, ti)
        print(f"pair_scores   compiled: {t_ext * 1e3:8.1f} ms "
              f"({args.n_trials / t_ext / 1e6:6.1f} M trials/s)  "
              f"speedup x{t_pure / t_ext:.2f}")
        print(f"  max |diff| = {np.abs(pairs_pure - pairs_ext).max():.3e}")

    t_pure, (mu_p, sig_p) = best_of(
        args.repeats, _cohort_stats_py, unit, cohort, args.top_n
    )
    print(f"cohort_stats  pure:     {t_pure * 1e3:8.1f} ms "
          f"({args.n_utts / t_pure / 1e3:6.1f} k utts/s)")
    if _core is not None:
        t_ext, (mu_c, sig_c) = best_of(
            args.repeats, _core.cohort_stats, unit, cohort, args.top_n
        )
        print(f"cohort_stats  compiled: {t_ext * 1e3:8.1f} ms "
              f"({args.n_utts / t_ext / 1e3:6.1f} k utts/s)  "
              f"speedup x{t_pure / t_ext:.2f}")
        print(f"  max |mu diff| = {np.abs(mu_p - mu_c).max():.3e}, "
              f"max |sigma diff| = {np.abs(sig_p - sig_c).max():.3e}")


if __name__ == "__main__":
    main()
