#!/usr/bin/env python3
"""Benchmark the compiled inner-loop kernel against the pure-numpy fallback.

Times the E-fold DGD step on a grid of problem sizes, including the paper
setup (30 agents, dimension 50).  Run after building the extension:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from dgdtrack import _kernels_py

try:
    from dgdtrack import _kernels
except ImportError:
    _kernels = None

CASES = [
    # (n_agents, dim, inner_steps, outer_calls)
    (10, 10, 5, 2000),
    (30, 50, 1, 2000),
    (30, 50, 5, 2000),
    (30, 50, 10, 1000),
    (100, 50, 5, 200),
]


def make_instance(n, d, seed):
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.0, 1.0, size=(n, n))
    m = (m + m.T) / 2
    m /= m.sum(axis=1, keepdims=True).max() * 1.1
    hessian = rng.uniform(0.01, 0.1, size=(n, d))
    target = rng.uniform(-1.0, 1.0, size=(n, d))
    w = rng.normal(size=(n, d))
    return np.ascontiguousarray(m), hessian, target, w


def time_impl(impl, m, h, b, steps, calls, w):
    buf = w.copy()
    impl.dgd_inner_steps(m, h, b, 0.05, steps, buf)  # warm up
    start = time.perf_counter()
    for _ in range(calls):
        np.copyto(buf, w)
        impl.dgd_inner_steps(m, h, b, 0.05, steps, buf)
    return (time.perf_counter() - start) / calls


def main():
    if _kernels is None:
        print("compiled kernel not built; showing the pure-numpy fallback only")
    header = f"{'N':>5} {'d':>5} {'E':>4} {'python':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for n, d, steps, calls in CASES:
        m, h, b, w = make_instance(n, d, seed=n + d)
        t_py = time_impl(_kernels_py, m, h, b, steps, calls, w)
        if _kernels is not None:
            t_c = time_impl(_kernels, m, h, b, steps, calls, w)
            print(f"{n:>5} {d:>5} {steps:>4} {t_py * 1e6:>10.1f}us "
                  f"{t_c * 1e6:>10.1f}us {t_py / t_c:>8.1f}x")
        else:
            print(f"{n:>5} {d:>5} {steps:>4} {t_py * 1e6:>10.1f}us {'-':>12} {'-':>9}")


if __name__ == "__main__":
    main()
