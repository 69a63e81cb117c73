"""Compare the compiled and NumPy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]
"""
import argparse
import timeit

import numpy as np

from gphier import _pykernels

try:
    from gphier import _ckernels
except ImportError:
    _ckernels = None

CASES = [(65, 256), (65, 4096), (65, 65536), (257, 65536)]


def bench(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'shape':>16}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}{'rel diff':>12}")
    for nt, P in CASES:
        F = rng.standard_normal((nt, P)) + 1j * rng.standard_normal((nt, P))
        om = rng.integers(-64, 64, P).astype(float)
        w2 = rng.random(P) + 1.0
        for name, fargs in (("duhamel_accumulate", (F, om, 0.01)), ("weighted_sqnorm", (F[0], w2))):
            fp = getattr(_pykernels, name)
            tp = bench(fp, fargs, args.repeat)
            if _ckernels is None:
                print(f"{name:<20}{str((nt, P)):>16}{tp * 1e3:>14.2f}{'n/a':>14}")
                continue
            fc = getattr(_ckernels, name)
            tc = bench(fc, fargs, args.repeat)
            ref = np.asarray(fp(*fargs))
            diff = np.max(np.abs(ref - np.asarray(fc(*fargs)))) / max(np.max(np.abs(ref)), 1e-300)
            print(f"{name:<20}{str((nt, P)):>16}{tp * 1e3:>14.2f}{tc * 1e3:>14.2f}{tp / tc:>10.2f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
