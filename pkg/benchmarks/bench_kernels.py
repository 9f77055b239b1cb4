"""Compiled vs numpy kernels: fast gradient and chain forward-backward.

    python benchmarks/bench_kernels.py [--nnz 256] [--trials 200]
"""

import argparse
import time

import numpy as np

from mllc import kernels
from mllc.cli import bench_fast_gradient, loglog_slope


def time_forward_backward(kern, l, trials, rng):
    s = rng.standard_normal(l)
    ms = -s
    kern.chain_forward_backward(s, ms)
    t = np.empty(trials)
    for k in range(trials):
        t0 = time.perf_counter_ns()
        kern.chain_forward_backward(s, ms)
        t[k] = time.perf_counter_ns() - t0
    return float(np.median(t))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nnz", type=int, default=256)
    ap.add_argument("--trials", type=int, default=200)
    args = ap.parse_args()
    ls = [64, 128, 256, 512, 1024]
    backends = ["python"] + (["compiled"] if kernels.compiled is not None else [])
    print(f"{'kernel':<18}{'backend':<10}" + "".join(f"{l:>12}" for l in ls) + f"{'slope':>8}")
    for name in backends:
        rows = bench_fast_gradient(ls, args.nnz, args.trials, backend=name)
        cells = "".join(f"{r[1] / 1e3:>10.1f}us" for r in rows)
        print(f"{'fast gradient':<18}{name:<10}{cells}{loglog_slope(rows):>8.2f}")
    rng = np.random.default_rng(0)
    for name in backends:
        kern = kernels.get_backend(name)
        rows = [(l, time_forward_backward(kern, l, args.trials, rng)) for l in ls]
        cells = "".join(f"{r[1] / 1e3:>10.1f}us" for r in rows)
        print(f"{'forward-backward':<18}{name:<10}{cells}{loglog_slope(rows):>8.2f}")


if __name__ == "__main__":
    main()
