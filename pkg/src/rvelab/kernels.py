"""Kernel backend selection.

The hot loops (pair overlap forces, voxelization) exist twice: a Cython
extension ``_kernels_cy`` and a pure-NumPy fallback ``_kernels_py``.  The
compiled backend is preferred at import; ``RVELAB_BACKEND=python`` forces
the fallback.  Both produce identical results up to floating-point
roundoff (``benchmarks/bench_kernels.py`` compares speed).
"""
from __future__ import annotations

import os

from . import _kernels_py

_forced = os.environ.get("RVELAB_BACKEND", "").lower()
if _forced not in ("", "cython", "python"):
    raise RuntimeError(f"RVELAB_BACKEND must be 'cython' or 'python', got {_forced!r}")

if _forced == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise
        _impl = _kernels_py
        BACKEND = "python"

pair_energy_gradient = _impl.pair_energy_gradient
voxelize_spheres = _impl.voxelize_spheres
voxelize_spherocylinders = _impl.voxelize_spherocylinders
