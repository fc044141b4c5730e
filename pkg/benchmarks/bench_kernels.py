"""Time the compiled and NumPy kernels on a full-size controller step.

    python3 benchmarks/bench_kernels.py [--n 20] [--m 500] [--eps 0.005] [--repeat 5]

Each backend gets the same cost matrices (one per seed) and the full
annealed solve that a controller step runs. Reports the best wall time per
backend and the largest coupling difference between the two.
"""

import argparse
import time

import numpy as np

from swarmtrack import kernels, ot


def _solve(impl, C, eps, tol, max_iter):
    saved = ot.kernels.sinkhorn_log
    ot.kernels.sinkhorn_log = impl.sinkhorn_log
    try:
        n, m = C.shape
        return ot.sinkhorn(ot.uniform_marginal(n), ot.uniform_marginal(m), C, eps, tol, max_iter)
    finally:
        ot.kernels.sinkhorn_log = saved


def _best(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20, help="resource particles")
    p.add_argument("--m", type=int, default=500, help="demand samples")
    p.add_argument("--eps", type=float, default=0.005)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=50_000)
    p.add_argument("--seeds", type=int, default=5, help="number of problem instances")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()

    backends = kernels.available_backends()
    g = np.random.default_rng(0)
    problems = [
        (g.uniform(size=(args.n, 2)), g.uniform(size=(args.m, 2))) for _ in range(args.seeds)
    ]
    print(f"sinkhorn {args.n}x{args.m}, eps={args.eps}, tol={args.tol:g}, {args.seeds} instances, best of {args.repeat}")

    results = {}
    for name, impl in sorted(backends.items()):
        cost_t, costs = _best(lambda: [impl.sq_euclidean(x, y) for x, y in problems], args.repeat)
        solve_t, plans = _best(lambda: [_solve(impl, C, args.eps, args.tol, args.max_iter) for C in costs], args.repeat)
        iters = sum(pl.iterations_used for pl in plans)
        results[name] = (cost_t, solve_t, plans)
        print(f"  {name:7s} cost_matrix {cost_t * 1e3:8.3f} ms   sinkhorn {solve_t * 1e3:9.2f} ms   ({iters} sweeps)")

    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        diff = max(float(np.max(np.abs(a.coupling - b.coupling))) for a, b in zip(py[2], cy[2]))
        print(f"  speedup: cost_matrix {py[0] / cy[0]:.1f}x, sinkhorn {py[1] / cy[1]:.1f}x; max |P_py - P_cy| = {diff:.1e}")
    else:
        print("  compiled backend not built; only the NumPy fallback was timed")


if __name__ == "__main__":
    main()
