"""Midpoint segmentation of configurations onto regular voxel grids.

A voxel belongs to the inclusion phase iff its center point lies inside
some particle; centers sit at ``(i + 1/2) * L/n`` with the grid origin at
the cell corner.  Periodic configurations rasterize all particle images
that intersect the cell; non-periodic (snapshot) configurations clip, which
is exactly where cut particles lose their outside part.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .geometry import Configuration

__all__ = [
    "VoxelGrid",
    "voxelize",
    "measured_volume_fraction",
    "save_grid",
    "load_grid",
]

PHASE_ENCODING = "uint8:0=matrix,1=inclusion"


@dataclass
class VoxelGrid:
    """Binary phase indicators on an n^d grid over a cell of edge L.

    ``phase`` axes are ordered (x, y[, z]); spacing is L/n.
    """

    phase: np.ndarray
    edge: float

    def __post_init__(self):
        self.phase = np.asarray(self.phase, dtype=np.uint8)
        if self.phase.ndim not in (2, 3):
            raise ValueError("phase must be a 2D or 3D array")
        n = self.phase.shape[0]
        if any(s != n for s in self.phase.shape):
            raise ValueError("grid must be cubic")
        if n < 1 or self.edge <= 0:
            raise ValueError("invalid grid geometry")

    @property
    def dim(self) -> int:
        return self.phase.ndim

    @property
    def n(self) -> int:
        return self.phase.shape[0]

    @property
    def spacing(self) -> float:
        return self.edge / self.n


def voxelize(config: Configuration, n: int) -> VoxelGrid:
    """Rasterize a configuration at resolution n per axis."""
    if n < 1:
        raise ValueError("resolution must be >= 1")
    kind = config.species.kind
    periodic = config.cell.periodic
    if kind == "spherocylinder":
        phase = kernels.voxelize_spherocylinders(
            config.centers, config.axes, 0.5 * config.species.length,
            config.species.radius, config.cell.edge, n, periodic,
            config.species.caps,
        )
    else:
        phase = kernels.voxelize_spheres(
            config.centers, config.species.radius, config.cell.edge, n, periodic,
        )
    return VoxelGrid(np.asarray(phase), config.cell.edge)


def measured_volume_fraction(grid: VoxelGrid) -> float:
    """Arithmetic mean of the phase indicators."""
    return float(grid.phase.mean())


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def _raw_path(path: Path) -> Path:
    return path.with_suffix(".raw")


def save_grid(grid: VoxelGrid, path) -> tuple[Path, Path]:
    """Write raw voxel bytes (x-fastest order) plus a JSON sidecar.

    ``path`` may carry either suffix (or none); both files share the stem.
    """
    path = Path(path)
    raw = _raw_path(path)
    sidecar = _sidecar_path(path)
    # axes are (x, y[, z]); transposing makes x the fastest-running index
    raw.write_bytes(grid.phase.T.tobytes(order="C"))
    sidecar.write_text(json.dumps({
        "dim": grid.dim,
        "n": grid.n,
        "L": grid.edge,
        "phase_encoding": PHASE_ENCODING,
    }))
    return raw, sidecar


def load_grid(path) -> VoxelGrid:
    """Read a grid written by :func:`save_grid`; validates the sidecar."""
    path = Path(path)
    sidecar = _sidecar_path(path)
    raw = _raw_path(path)
    meta = json.loads(sidecar.read_text())
    for key in ("dim", "n", "L", "phase_encoding"):
        if key not in meta:
            raise ValueError(f"grid sidecar misses field {key!r}")
    if meta["phase_encoding"] != PHASE_ENCODING:
        raise ValueError(f"unsupported phase encoding {meta['phase_encoding']!r}")
    dim, n = int(meta["dim"]), int(meta["n"])
    data = np.frombuffer(raw.read_bytes(), dtype=np.uint8)
    if data.size != n**dim:
        raise ValueError(
            f"raw grid has {data.size} voxels, sidecar promises {n}^{dim}"
        )
    if not np.all(data <= 1):
        raise ValueError("phase indicators must be 0 or 1")
    phase = data.reshape((n,) * dim).T
    return VoxelGrid(phase.copy(), float(meta["L"]))
