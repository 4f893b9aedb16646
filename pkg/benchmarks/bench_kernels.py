"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from rscnet import _pykernels

try:
    from rscnet import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(rng):
    for n in (16, 64, 128):
        A = rng.standard_normal((n, n))
        A = np.ascontiguousarray(A + A.T)
        yield f"jacobi_eigh n={n}", "jacobi_eigh", (A,)
    for shape in ((4, 4, 8), (8, 64, 8), (64, 4096, 64)):
        T = np.ascontiguousarray(rng.standard_normal(shape))
        x0, z0 = rng.standard_normal(shape[0]), rng.standard_normal(shape[1])
        yield f"ascent_221 {shape}", "ascent_221", (T, x0, z0, 100)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for label, name, inputs in cases(rng):
        py = best_of(lambda: getattr(_pykernels, name)(*[a.copy() if hasattr(a, 'copy') else a for a in inputs]),
                     args.repeat)
        if _ckernels is None:
            print(f"{label:32s} {py * 1e3:12.3f} {'n/a':>12s}")
            continue
        cy = best_of(lambda: getattr(_ckernels, name)(*[a.copy() if hasattr(a, 'copy') else a for a in inputs]),
                     args.repeat)
        print(f"{label:32s} {py * 1e3:12.3f} {cy * 1e3:12.3f} {py / cy:8.1f}x")


if __name__ == "__main__":
    main()
