"""Compare the numba and numpy backends on the two hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Runs a full second-best solve (dominated by the jump sweep over b) and a
Monte Carlo batch under each backend, checks the outputs agree and prints
wall-clock times. The first numba call includes JIT compilation, so it is
timed separately.
"""
import argparse
import os
import time

import numpy as np

from parachute.accel import HAS_NUMBA
from parachute.model import ModelParams
from parachute.montecarlo import SimConfig, simulate
from parachute.secondbest import SolverConfig, solve


def timed(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--nodes", type=int, default=2000)
    args = ap.parse_args()

    params = ModelParams(m=0.2)
    solver = SolverConfig(n_nodes=args.nodes)
    sim = SimConfig(n_paths=args.paths, horizon=10.0)
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    results = {}
    for name in backends:
        os.environ["PARACHUTE_BACKEND"] = name
        t0 = time.perf_counter()
        sol = solve(params, solver)
        simulate(sol.value, sol.policy, params, sim.replace(n_paths=4, horizon=0.01))
        first = time.perf_counter() - t0
        t_solve, sol = timed(lambda: solve(params, solver), args.repeat)
        t_sim, batch = timed(lambda: simulate(sol.value, sol.policy, params, sim), args.repeat)
        results[name] = (sol, batch)
        print(f"{name:>6}: first call {first:7.3f}s  solve {t_solve:7.3f}s  "
              f"simulate {t_sim:7.3f}s ({args.paths} paths)")
    if len(results) == 2:
        (s0, b0), (s1, b1) = results["numpy"], results["numba"]
        dv = np.max(np.abs(s0.value.v - s1.value.v))
        same = np.array_equal(b0.tau, b1.tau) and np.array_equal(b0.X_tau, b1.X_tau)
        print(f"max |v_numpy - v_numba| = {dv:.3e}; identical paths: {same}")
    os.environ.pop("PARACHUTE_BACKEND", None)


if __name__ == "__main__":
    main()
