"""Benchmark the compiled kernels against the pure-NumPy fallback.

Run:  python benchmarks/bench_kernels.py
"""
import time

import numpy as np

from rvelab import _kernels_py
from rvelab.packing import make_rng, species_for_count

try:
    from rvelab import _kernels_cy
except ImportError:
    _kernels_cy = None


def timeit(fn, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_pair_forces():
    print("pair_energy_gradient (overlap forces via cell lists)")
    print(f"{'N':>8} {'dim':>4} {'python':>12} {'cython':>12} {'speedup':>9}")
    for n, dim in ((512, 3), (4096, 3), (32768, 3), (4096, 2)):
        rng = make_rng(1)
        edge = 2.0 if n > 2000 else 1.0
        sp = species_for_count("sphere" if dim == 3 else "disk", 0.30, n, edge)
        x = rng.uniform(0, edge, (n, dim))
        two = 2 * 1.2 * sp.radius
        t_py = timeit(lambda: _kernels_py.pair_energy_gradient(x, edge, two))
        row = f"{n:>8} {dim:>4} {t_py * 1e3:>10.2f}ms"
        if _kernels_cy is not None:
            t_cy = timeit(lambda: _kernels_cy.pair_energy_gradient(x, edge, two))
            row += f" {t_cy * 1e3:>10.2f}ms {t_py / t_cy:>8.1f}x"
        print(row)


def bench_voxelize():
    print("\nvoxelize_spheres (midpoint rasterization)")
    print(f"{'N':>8} {'grid':>8} {'python':>12} {'cython':>12} {'speedup':>9}")
    for n_part, n_vox, dim in ((64, 64, 3), (512, 128, 3), (4096, 256, 3),
                               (256, 256, 2)):
        rng = make_rng(2)
        sp = species_for_count("sphere" if dim == 3 else "disk", 0.30, n_part, 1.0)
        x = rng.uniform(0, 1.0, (n_part, dim))
        t_py = timeit(
            lambda: _kernels_py.voxelize_spheres(x, sp.radius, 1.0, n_vox, True),
            repeat=3)
        row = f"{n_part:>8} {n_vox:>6}^{dim} {t_py * 1e3:>10.2f}ms"
        if _kernels_cy is not None:
            t_cy = timeit(
                lambda: _kernels_cy.voxelize_spheres(x, sp.radius, 1.0, n_vox, True),
                repeat=3)
            row += f" {t_cy * 1e3:>10.2f}ms {t_py / t_cy:>8.1f}x"
        print(row)


if __name__ == "__main__":
    if _kernels_cy is None:
        print("compiled backend not available; benchmarking fallback only\n")
    bench_pair_forces()
    bench_voxelize()
