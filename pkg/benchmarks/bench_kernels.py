"""Compare the numba and numpy LSTM kernel paths on training-shaped work.

Usage: python3 benchmarks/bench_kernels.py [--batch 32] [--reps 30]

Times one forward + backward pass over a (batch, 90, 126) input with 64
hidden units (the all-landmarks configuration). The numba path is timed
after a warmup call so JIT compilation is excluded.
"""

import argparse
import statistics
import time

import numpy as np

from flapnet import kernels


def build_problem(rng, batch, t_len=90, d=126, h=64):
    x = np.ascontiguousarray(rng.normal(0, 0.3, size=(t_len, batch, d)))
    W = rng.normal(0, 0.1, size=(d, 4 * h))
    U = rng.normal(0, 0.1, size=(h, 4 * h))
    b = np.zeros(4 * h)
    dh = rng.normal(size=(batch, h))
    u_t = np.ascontiguousarray(U.T)
    return x, W, U, b, dh, u_t


def run_once(forward, backward, problem):
    x, W, U, b, dh, u_t = problem
    t_len, batch, _ = x.shape
    h = U.shape[0]
    gi, gf, gg, go, tc = (np.empty((t_len, batch, h)) for _ in range(5))
    cs = np.zeros((t_len + 1, batch, h))
    hs = np.zeros((t_len + 1, batch, h))
    dz = np.empty((t_len, batch, 4 * h))
    forward(x, W, U, b, gi, gf, gg, go, cs, hs, tc)
    backward(dh, u_t, gi, gf, gg, go, cs, tc, dz)
    return dz


def bench(name, forward, backward, problem, reps):
    run_once(forward, backward, problem)  # warmup / JIT
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        run_once(forward, backward, problem)
        times.append(time.perf_counter() - t0)
    median = statistics.median(times)
    print(f"{name:>6}: median {median * 1e3:8.2f} ms  (min {min(times) * 1e3:.2f} ms over {reps} reps)")
    return median


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=32)
    parser.add_argument("--reps", type=int, default=30)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    problem = build_problem(rng, args.batch)
    print(f"forward+backward, batch={args.batch}, T=90, D=126, H=64")

    t_np = bench("numpy", kernels.forward_core_numpy, kernels.backward_core_numpy, problem, args.reps)
    if kernels.forward_core_numba is None:
        print(" numba: not available")
        return
    t_nb = bench("numba", kernels.forward_core_numba, kernels.backward_core_numba, problem, args.reps)
    print(f"speedup: {t_np / t_nb:.2f}x")


if __name__ == "__main__":
    main()
