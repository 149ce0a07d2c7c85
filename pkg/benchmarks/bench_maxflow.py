"""Benchmark the compiled max-flow core against the pure-Python fallback.

Builds banded multi-surface problems shaped like real pipeline stages
(narrow depth band, smooth V-shaped costs plus noise), solves each with both
backends, checks the results are identical, and prints a timing table.

Usage:
    python3 benchmarks/bench_maxflow.py           # default sizes, ~15 s
    python3 benchmarks/bench_maxflow.py --large   # adds a 550k-node case
    python3 benchmarks/bench_maxflow.py --repeats 5
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from choroidseg import GraphSegProblem, available_backends, solve

SCENARIOS = [
    # (nx, ny, band height, surfaces)
    (16, 16, 8, 1),
    (32, 32, 12, 1),
    (32, 32, 12, 2),
    (64, 48, 16, 2),
]
LARGE_SCENARIO = (96, 64, 24, 3)


def make_problem(nx: int, ny: int, band: int, n_surf: int,
                 seed: int = 0) -> GraphSegProblem:
    rng = np.random.default_rng(seed)
    nz = band + 8
    z = np.arange(nz, dtype=np.float64)
    costs = np.empty((n_surf, nx, ny, nz))
    for s in range(n_surf):
        center = band // 2 + 2 + 3 * s + rng.uniform(-1.0, 1.0, (nx, ny, 1))
        costs[s] = (np.abs(z[None, None, :] - center) / nz
                    + rng.uniform(0.0, 0.05, (nx, ny, nz)))
    lo = np.zeros((nx, ny), dtype=np.int64)
    hi = np.full((nx, ny), nz - 1, dtype=np.int64)
    separations = tuple((1, nz - 1) for _ in range(n_surf - 1))
    return GraphSegProblem(costs=costs, band_lo=lo, band_hi=hi,
                           delta_x=2, delta_y=2, separations=separations)


def best_time(problem: GraphSegProblem, backend: str, repeats: int):
    solution, best = None, float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        solution = solve(problem, backend=backend)
        best = min(best, time.perf_counter() - start)
    return solution, best


def run(repeats: int, include_large: bool) -> int:
    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; benchmarking python only")
    scenarios = SCENARIOS + ([LARGE_SCENARIO] if include_large else [])
    header = (f"{'scenario':>22} {'nodes':>9} {'compiled':>10} "
              f"{'python':>10} {'speedup':>8}  agree")
    print(header)
    print("-" * len(header))
    all_agree = True
    for nx, ny, band, n_surf in scenarios:
        problem = make_problem(nx, ny, band, n_surf)
        label = f"{nx}x{ny} band {band + 8} x{n_surf}"
        sol_py, t_py = best_time(problem, "python", repeats)
        if "compiled" in backends:
            sol_c, t_c = best_time(problem, "compiled", repeats)
            agree = (np.array_equal(sol_c.heights, sol_py.heights)
                     and sol_c.total_cost_quantized
                     == sol_py.total_cost_quantized)
            all_agree &= agree
            print(f"{label:>22} {sol_c.n_nodes:>9,} {t_c:>9.3f}s "
                  f"{t_py:>9.3f}s {t_py / t_c:>7.1f}x  {agree}")
        else:
            print(f"{label:>22} {sol_py.n_nodes:>9,} {'-':>10} "
                  f"{t_py:>9.3f}s {'-':>8}  -")
    if not all_agree:
        print("BACKENDS DISAGREE — this is a bug")
        return 1
    return 0


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats per scenario; best is reported")
    parser.add_argument("--large", action="store_true",
                        help="add a 550k-node scenario (pure Python takes "
                             "about half a minute)")
    args = parser.parse_args()
    return run(args.repeats, args.large)


if __name__ == "__main__":
    raise SystemExit(main())
