"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--size 200000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from cvdiversity import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(size):
    rng = np.random.default_rng(0)
    T2 = rng.uniform(1e-6, 1, (size, 2))
    T4 = rng.uniform(1e-6, 1, (size, 4))
    t = rng.uniform(1e-6, 1, size)
    w2, s2, g2 = np.array([0.5 ** 0.5] * 2), np.array([-(0.5 ** 0.5), 0.5 ** 0.5]), np.ones(2)
    w4, s4, g4 = np.full(4, 0.5), np.full(4, 0.5), np.full(4, 2.0)
    return {
        "uniforms": lambda b: b.uniforms(7, 1, 0, size),
        "fidelity N=2 passive": lambda b: b.diversity_fidelity(T2, w2, s2, g2, kernels.PASSIVE, 0.5, 1.0, 1.0, 1.0),
        "fidelity N=4 post-amp": lambda b: b.diversity_fidelity(T4, w4, s4, g4, kernels.POST_AMPLIFIED, 0.5, 1.0, 1.0, 1.0),
        "key rates heterodyne": lambda b: b.key_rates(t, 10.0, 0.2, 1.0, 2, False),
        "key rates homodyne": lambda b: b.key_rates(t, 5.0, 0.2, 1.0, 1, False),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    py, cy = kernels.python_backend, kernels.compiled_backend
    if cy is None:
        print("compiled extension not built; only the python backend is timed")
    print(f"{'kernel':<24}{'python [ms]':>14}{'compiled [ms]':>16}{'speedup':>10}")
    for name, fn in cases(args.size).items():
        tp = best_of(lambda: fn(py), args.repeat)
        if cy is None:
            print(f"{name:<24}{tp * 1e3:>14.2f}{'-':>16}{'-':>10}")
            continue
        tc = best_of(lambda: fn(cy), args.repeat)
        print(f"{name:<24}{tp * 1e3:>14.2f}{tc * 1e3:>16.2f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
