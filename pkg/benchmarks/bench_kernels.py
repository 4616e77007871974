"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n 5000] [--avg-degree 12] [--reps 20]
"""

import argparse
import time

import numpy as np

from lggd.backend import get_kernels
from lggd.data import gen_sbm


def timeit(fn, reps):
    fn()  # warm-up (numba compilation)
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--avg-degree", type=float, default=12.0)
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()

    per_class = args.n // 4
    p_in = args.avg_degree / per_class
    ds = gen_sbm(per_class, 4, min(p_in, 1.0), p_in / 4, 8, 0.5, seed=0)
    g = ds.graph
    n = g.n_nodes
    print(f"graph: n={n}, undirected edges={g.edge_count}")

    rng = np.random.default_rng(1)
    f2 = rng.uniform(0.0, 10.0, size=(4, n))
    grad = rng.standard_normal((4, n))
    rhs = np.ones(n)
    mask = np.ones(n, dtype=bool)
    mask[:10] = False
    src = np.arange(10, dtype=np.int64)

    rows = []
    results = {}
    for name in ("numpy", "numba"):
        k = get_kernels(name)
        cases = {
            "grad_norm(p=1)": lambda: k.grad_norm(g.indptr, g.indices, g.csqrt, f2, False),
            "grad_norm_vjp(p=1)": lambda: k.grad_norm_vjp(g.indptr, g.indices, g.csqrt, f2, grad, False),
            "gauss_seidel_sweep": lambda: k.gauss_seidel_sweep(
                g.indptr, g.indices, g.csqrt, f2[0].copy(), rhs, mask, False),
            "hop_distances": lambda: k.hop_distances(g.indptr, g.indices, src, 1e6),
            "rk4_stages(p=1)": lambda: k.rk4_stages(
                g.indptr, g.indices, g.csqrt, rhs, f2, 0.1, False),
            "rk4_step_vjp(p=1)": lambda: k.rk4_step_vjp(
                g.indptr, g.indices, g.csqrt, rhs, f2, f2, f2, f2, 0.1, False, grad),
        }
        for case, fn in cases.items():
            results[(name, case)] = timeit(fn, args.reps)
            rows.append(case)

    print(f"{'kernel':24} {'numpy':>12} {'numba':>12} {'speedup':>9}")
    for case in dict.fromkeys(rows):
        tn = results[("numpy", case)]
        tb = results[("numba", case)]
        print(f"{case:24} {tn * 1e3:>10.3f}ms {tb * 1e3:>10.3f}ms {tn / tb:>8.1f}x")


if __name__ == "__main__":
    main()
