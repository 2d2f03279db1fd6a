"""Compare the compiled and pure-Python simulation kernels.

    python benchmarks/bench_kernels.py [--reps 200] [--n 50]

Both backends produce bit-identical rewards; the script checks that too.
"""
import argparse
import time

import numpy as np

from lpbandit import _pykernels, kernels
from lpbandit.model import random_model
from lpbandit.policies import lp_index_policy
from lpbandit.relaxation import solve_finite
from lpbandit.simulate import simulate_policy


def bench(backend, model, rule, n, reps, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = simulate_policy(model, rule, n, reps, seed=0, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, res.rewards


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--T", type=int, default=20)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    model = random_model(args.d, args.T, seed=0)
    rule = lp_index_policy(model, solve_finite(model))
    if kernels.compiled_backend is None:
        print("compiled extension not available; only the fallback can run")
        return
    tc, rc = bench(kernels.compiled_backend, model, rule, args.n, args.reps, args.repeat)
    tp, rp = bench(_pykernels, model, rule, args.n, args.reps, 1)
    print(f"model d={args.d} T={args.T}, n={args.n}, {args.reps} replications")
    print(f"compiled : {tc:8.3f} s")
    print(f"python   : {tp:8.3f} s")
    print(f"speedup  : {tp / tc:8.1f}x")
    print(f"identical: {np.array_equal(rc, rp)}")


if __name__ == "__main__":
    main()
