"""Time the StrictBR kernels on each available backend.

    python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]
"""
import argparse
import time

import numpy as np

from spectrum_market import kernels


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    a, b, c = np.array([30.0, 30.0]), np.array([2.0, 4.0]), 1.5
    q = np.array([100.0, 100.0])
    gamma, p0 = np.array([0.07, 0.02]), np.array([5.0, 5.0])
    u = np.random.default_rng(0).random(2 * args.steps)

    backends = kernels.backends()
    timings = {}
    outputs = {}
    for name, impl in sorted(backends.items()):
        orbit = _best_of(lambda: impl.br_orbit(a, b, c, q, gamma, p0, args.steps, u, 0.01), args.repeat)
        lyap = _best_of(lambda: impl.br_lyapunov(a, b, c, q, gamma, p0, 1000, args.steps - 1000, u, 0.01, 0),
                        args.repeat)
        timings[name] = (orbit, lyap)
        outputs[name] = impl.br_lyapunov(a, b, c, q, gamma, p0, 1000, args.steps - 1000, u, 0.01, 0)[0]
        print(f"{name:8s} br_orbit {orbit * 1e3:9.2f} ms   br_lyapunov {lyap * 1e3:9.2f} ms   "
              f"({args.steps} steps, selected backend: {kernels.BACKEND})")
    if len(timings) == 2:
        (po, pl), (co, cl) = timings["python"], timings["cython"]
        print(f"speedup  br_orbit {po / co:6.1f}x   br_lyapunov {pl / cl:6.1f}x")
        print(f"lambda identical across backends: {outputs['python'] == outputs['cython']}")


if __name__ == "__main__":
    main()
