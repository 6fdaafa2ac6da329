"""Benchmark the compiled (numba) kernel path against the pure-numpy fallback.

Run twice, once per path, from the repository root:

    python benchmarks/bench_kernels.py
    COARSEGEN_DISABLE_NUMBA=1 python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from coarsegen import kernels


def bench(label, fn, *args, repeat: int = 5, warmup: int = 1) -> float:
    for _ in range(warmup):
        fn(*args)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    best = min(times)
    print(f"{label:<32s} {best * 1e3:10.3f} ms")
    return best


def main() -> None:
    path = "numba" if kernels.HAVE_NUMBA else "numpy"
    print(f"kernel path: {path}")
    rng = np.random.default_rng(0)

    coords = rng.uniform(0, 30, size=(2000, 3))
    bench("pairs_within_cutoff n=2000", kernels.pairs_within_cutoff, coords, 4.0)

    d = rng.uniform(0, 10, size=100_000)
    centers = np.linspace(0, 10, 16)
    bench("gaussian_basis n=100k", kernels.gaussian_basis, d, centers, 0.6667)

    a = rng.standard_normal((64, 40, 3))
    b = rng.standard_normal((64, 40, 3))
    bench("rmsd_matrix 64x64 m=40", kernels.rmsd_matrix, a, b)


if __name__ == "__main__":
    main()
