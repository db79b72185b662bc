"""Compare the compiled and numpy kernel backends.

Times a full filter run (n updates, growing inverse) per backend and
checks that both produce the same predictions.

    python benchmarks/bench_kernels.py [--n 1000] [--repeat 3]
"""

import argparse
import statistics
import time

import numpy as np

from qkaf import CriterionParams, FilterConfig, KernelFilter, available_backends


def one_run(backend, U, d, cfg):
    f = KernelFilter(cfg, U.shape[1], capacity=len(d), backend=backend)
    t0 = time.perf_counter()
    for i in range(len(d)):
        f.update(U[i], d[i])
    return time.perf_counter() - t0, f


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--dim", type=int, default=7)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    U = rng.uniform(-1, 1, size=(args.n, args.dim))
    d = np.sin(3 * U[:, 0]) * U[:, 1] + 0.1 * rng.standard_normal(args.n)
    cfg = FilterConfig("QKRGMEE", criterion=CriterionParams(window_len=50), gamma=0.04)

    times, preds = {}, {}
    for b in available_backends():
        runs = [one_run(b, U, d, cfg) for _ in range(args.repeat)]
        times[b] = statistics.median(t for t, _ in runs)
        preds[b] = runs[-1][1].predict_many(U[:100])
        print(f"{b:>7}: {times[b]:.3f} s for {args.n} updates ({1e6 * times[b] / args.n:.1f} us/update)")
    if len(times) == 2:
        print(f"speedup cython/python: {times['python'] / times['cython']:.1f}x")
        print(f"max prediction difference: {np.max(np.abs(preds['cython'] - preds['python'])):.2e}")


if __name__ == "__main__":
    main()
