#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage:
    python benchmarks/kernel_benchmark.py [--paths N] [--repeats K]

Both backends are imported directly from brisk.kernels, so one process
measures both; the module-level env flag BRISK_PURE_NUMPY only changes which
one the library dispatches to.
"""

import argparse
import math
import time

import numpy as np

from brisk import kernels


def _timeit(fn, repeats):
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_mc(paths, repeats):
    waypoints = np.array([[0.1, 0.1], [0.5, 0.1], [0.9, 0.4], [0.6, 0.8]])
    durations = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)
    chol = math.sqrt(1e-3) * np.eye(2)
    poly = np.array([[0.45, 0.2], [0.75, 0.2], [0.75, 0.45], [0.45, 0.45]])
    offsets = np.array([0, 4], dtype=np.int64)
    balls_c = np.array([[0.25, 0.55]])
    balls_r = np.array([0.12])
    empty_n = np.zeros((0, 2))
    empty_o = np.zeros(0)
    r_d = 100
    args_np = (waypoints, durations, r_d, chol, poly, offsets, balls_c, balls_r,
               empty_n, empty_o, np.uint64(7), paths)
    t_np, ind_np = _timeit(lambda: kernels.np_mc_collisions(*args_np), repeats)
    row = {"kernel": "mc_collisions", "numpy_s": t_np, "numba_s": None,
           "speedup": None, "agree": None}
    if kernels.NUMBA_ENABLED:
        bbox = np.array([[poly[:, 0].min(), poly[:, 1].min(),
                          poly[:, 0].max(), poly[:, 1].max()]])
        args_nb = (waypoints, durations, r_d, chol, poly, offsets, bbox, balls_c,
                   balls_r, empty_n, empty_o, np.uint64(7), paths)
        kernels.nb_mc_collisions(*args_nb)  # compile outside the timing loop
        t_nb, ind_nb = _timeit(lambda: kernels.nb_mc_collisions(*args_nb), repeats)
        row["numba_s"] = t_nb
        row["speedup"] = t_np / t_nb
        row["agree"] = abs(float(ind_np.mean()) - float(ind_nb.mean())) < 5e-3
    return row


def bench_qmc(repeats):
    rng = np.random.default_rng(3)
    dim = 10
    A = rng.normal(size=(dim, dim))
    cov = A @ A.T + dim * np.eye(dim)
    scale = np.sqrt(np.diag(cov))
    cho = np.linalg.cholesky(cov / np.outer(scale, scale))
    lo = np.full(dim, -np.inf)
    hi = np.full(dim, 0.8)
    q = np.sqrt(np.array([2., 3., 5., 7., 11., 13., 17., 19., 23.])) % 1.0
    shifts = np.random.default_rng(5).random((8, dim - 1))
    n_pts = 20_000
    t_np, s_np = _timeit(lambda: kernels.np_qmc_stage(cho, lo, hi, q, shifts, 0, n_pts),
                         repeats)
    row = {"kernel": "qmc_stage", "numpy_s": t_np, "numba_s": None,
           "speedup": None, "agree": None}
    if kernels.NUMBA_ENABLED:
        kernels.nb_qmc_stage(cho, lo, hi, q, shifts, 0, 8)
        t_nb, s_nb = _timeit(lambda: kernels.nb_qmc_stage(cho, lo, hi, q, shifts, 0, n_pts),
                             repeats)
        row["numba_s"] = t_nb
        row["speedup"] = t_np / t_nb
        row["agree"] = bool(np.allclose(s_np, s_nb, rtol=1e-9, atol=1e-12))
    return row


def bench_sup(paths, repeats):
    t_np, h_np = _timeit(lambda: kernels.np_sup_hits(0.05, 0.002, 2000, np.uint64(11), paths),
                         repeats)
    row = {"kernel": "sup_hits", "numpy_s": t_np, "numba_s": None,
           "speedup": None, "agree": None}
    if kernels.NUMBA_ENABLED:
        kernels.nb_sup_hits(0.05, 0.002, 4, np.uint64(11), 4)
        t_nb, h_nb = _timeit(lambda: kernels.nb_sup_hits(0.05, 0.002, 2000, np.uint64(11), paths),
                             repeats)
        row["numba_s"] = t_nb
        row["speedup"] = t_np / t_nb
        row["agree"] = abs(float(h_np.mean()) - float(h_nb.mean())) < 5e-3
    return row


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=20_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    print(f"numba available: {kernels.NUMBA_ENABLED} (dispatching to {kernels.BACKEND})")
    rows = [bench_mc(args.paths, args.repeats),
            bench_qmc(args.repeats),
            bench_sup(args.paths, args.repeats)]
    print(f"{'kernel':<16} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8}  agree")
    for r in rows:
        nb = f"{r['numba_s']:.4f}" if r["numba_s"] is not None else "-"
        sp = f"{r['speedup']:.1f}x" if r["speedup"] is not None else "-"
        print(f"{r['kernel']:<16} {r['numpy_s']:>10.4f} {nb:>10} {sp:>8}  {r['agree']}")


if __name__ == "__main__":
    main()
