"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from propshare import _backend
from propshare.dynamics import ConvergenceCriterion, run_dynamics
from propshare.game import GameConfig
from propshare.preferences import generate_uniform_preferences


def cases(rng):
    n = 100
    w = rng.dirichlet(np.ones(n))
    y = rng.uniform(0.05, 1.0, n)
    x = rng.dirichlet(np.ones(n))
    cost = rng.random((60, 100))
    weights = generate_uniform_preferences(40, 100, 0)
    bounded = GameConfig(40, 100, parallelism_bounds=[20] * 40)
    return {
        "best_response n=100": lambda k: k.best_response(w, y, 1.0, 1e-9),
        "local_search n=100 k=20": lambda k: k.local_search(w, y, 1.0, 20, 1e-9),
        "greedy_step n=100": lambda k: k.greedy_step(x, w, y, 0.01, 1e-9, n),
        "hungarian 60x100": lambda k: k.hungarian_min(cost),
        "dynamics br m=40 n=100": lambda k: run_dynamics(
            GameConfig(40, 100), weights, "br", ConvergenceCriterion(max_iterations=5), keep_bids=False),
        "dynamics ls m=40 n=100 delta=20": lambda k: run_dynamics(
            bounded, weights, "ls", ConvergenceCriterion(max_iterations=3), keep_bids=False),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = _backend.available()
    print(f"backends: {', '.join(backends)}")
    print(f"{'case':34s}" + "".join(f"{b:>14s}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for name, fn in cases(np.random.default_rng(0)).items():
        times = {}
        for b in backends:
            prev = _backend.set_backend(b)
            try:
                k = _backend.kernels
                number = 1 if name.startswith("dynamics") else 20
                t = min(timeit.repeat(lambda: fn(k), number=number, repeat=args.repeat)) / number
            finally:
                _backend.set_backend(prev)
            times[b] = t
        row = f"{name:34s}" + "".join(f"{times[b] * 1e3:11.3f} ms" for b in backends)
        if len(backends) > 1:
            row += f"  {times['python'] / times['cython']:7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
