"""Ensemble protocols: periodized generation and snapshot cut-out.

Periodized draws pack directly on the torus Q_L, so all inclusions belong
to one translation-stationary species.  Snapshot draws pack a magnified
parent torus, then restrict to the subcell [0, L)^d anchored at the origin
corner: particles (or particle images under the parent's periodicity)
intersecting the subcell are kept with their original geometry, and the
rasterizer clips whatever sticks out.  The Poisson variant randomizes the
particle count at fixed target fraction.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import Cell, Configuration, Species
from .packing import (
    PackingParams,
    PackingReport,
    make_rng,
    mcm_pack,
    sam_pack,
    species_for_count,
)

__all__ = [
    "ProtocolSpec",
    "PackingError",
    "derive_seed",
    "draw",
    "draw_periodized",
    "draw_snapshot",
    "draw_poisson_periodized",
    "snapshot_parent_spec",
]

PROTOCOLS = ("periodized", "snapshot", "poisson")


class PackingError(RuntimeError):
    """A generator failed to reach its target fraction."""

    def __init__(self, message: str, report: PackingReport | None = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class ProtocolSpec:
    """Recipe for drawing one realization.

    ``size`` is K for disks/spheres (K^d particles on the unit cell) and
    L/l for fibers (cell edge in units of the fiber length).  Snapshot
    parents are magnified by 2 (disks/spheres) or 3/2 (fibers) by default.
    """

    protocol: str
    shape: str
    size: int
    phi: float
    isolation: float = 1.2
    magnification: float | None = None
    aspect: float = 20.0
    poisson_retry_cap: int = 8
    packing: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.shape not in ("disk", "sphere", "spherocylinder"):
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.size < 1:
            raise ValueError("size must be >= 1")
        if self.magnification is not None and not self.magnification > 1:
            raise ValueError("magnification must exceed 1")

    @property
    def dim(self) -> int:
        return 2 if self.shape == "disk" else 3

    @property
    def edge(self) -> float:
        # unit cell for disks/spheres; fiber cells measured in fiber lengths
        return float(self.size) if self.shape == "spherocylinder" else 1.0

    @property
    def snapshot_magnification(self) -> float:
        if self.magnification is not None:
            return self.magnification
        return 1.5 if self.shape == "spherocylinder" else 2.0


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary labeled parts (SHA-256 based)."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _params(spec: ProtocolSpec, seed: int) -> PackingParams:
    return PackingParams(
        target_phi=spec.phi,
        isolation_factor=spec.isolation,
        seed=seed,
        **spec.packing,
    )


def _meta(spec: ProtocolSpec, seed: int, **extra) -> dict:
    meta = {
        "protocol": spec.protocol,
        "shape": spec.shape,
        "size": spec.size,
        "target_phi": spec.phi,
        "isolation_factor": spec.isolation,
        "seed": int(seed),
    }
    meta.update(extra)
    return meta


def draw_periodized(spec: ProtocolSpec, seed: int) -> Configuration:
    """One realization on the periodic cell: exactly K^d disks/spheres, or
    the SAM fiber count filling the fraction."""
    params = _params(spec, seed)
    if spec.shape == "spherocylinder":
        nominal = Species("spherocylinder", 0.5 / spec.aspect, length=1.0)
        config, report = sam_pack(Cell(3, spec.edge), nominal, params)
    else:
        count = spec.size ** spec.dim
        species = species_for_count(spec.shape, spec.phi, count, spec.edge)
        config, report = mcm_pack(Cell(spec.dim, spec.edge), species, params)
    if not report.success:
        raise PackingError(
            f"periodized draw failed (seed={seed}): {report.failure_reason}",
            report,
        )
    config.species_meta.update(_meta(spec, seed))
    return config


def snapshot_parent_spec(spec: ProtocolSpec) -> ProtocolSpec:
    """The periodized recipe of a snapshot draw's parent cell."""
    m = spec.snapshot_magnification
    if spec.shape == "spherocylinder":
        parent_size = spec.size * m
        if abs(parent_size - round(parent_size)) > 1e-12:
            raise ValueError("magnification * size must be integral for fibers")
        parent_size = int(round(parent_size))
    else:
        parent_size = spec.size * m
        if abs(parent_size - round(parent_size)) > 1e-12:
            raise ValueError("magnification * K must be integral")
        parent_size = int(round(parent_size))
    return replace(spec, protocol="periodized", size=parent_size)


def _point_box_distance(points: np.ndarray, edge: float) -> np.ndarray:
    """Distance from points to the box [0, edge]^d (0 inside)."""
    excess = np.maximum(np.abs(points - 0.5 * edge) - 0.5 * edge, 0.0)
    return np.sqrt(np.sum(excess * excess, axis=-1))


def _segment_box_distance(p: np.ndarray, d: np.ndarray, edge: float,
                          iters: int = 80) -> np.ndarray:
    """Distance from segments (midpoint p, half-extent d) to [0, edge]^3.

    dist(p + t d, box) is convex in t, so a ternary search is exact to
    machine precision."""
    lo = np.full(p.shape[:-1], -1.0)
    hi = np.full(p.shape[:-1], 1.0)
    for _ in range(iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = _point_box_distance(p + m1[..., None] * d, edge)
        f2 = _point_box_distance(p + m2[..., None] * d, edge)
        take = f1 < f2
        hi = np.where(take, m2, hi)
        lo = np.where(take, lo, m1)
    t = 0.5 * (lo + hi)
    return _point_box_distance(p + t[..., None] * d, edge)


def _image_offsets(dim: int, edge: float) -> np.ndarray:
    shifts = np.array([-edge, 0.0, edge])
    grids = np.meshgrid(*([shifts] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def draw_snapshot(spec: ProtocolSpec, seed: int) -> Configuration:
    """Cut-out realization: pack the magnified parent torus, keep every
    particle image intersecting the subcell [0, L)^d, lose periodicity."""
    parent_spec = snapshot_parent_spec(spec)
    parent = draw_periodized(parent_spec, seed)
    edge = spec.edge
    parent_edge = parent.cell.edge
    offsets = _image_offsets(parent.cell.dim, parent_edge)
    images = parent.centers[:, None, :] + offsets[None, :, :]
    radius = parent.species.radius
    if spec.shape == "spherocylinder":
        half = 0.5 * parent.species.length * parent.axes
        dist = _segment_box_distance(
            images, np.broadcast_to(half[:, None, :], images.shape), edge
        )
    else:
        dist = _point_box_distance(images, edge)
    keep = dist <= radius
    kept_centers = images[keep]
    kept_axes = None
    if spec.shape == "spherocylinder":
        idx = np.nonzero(keep)[0]
        kept_axes = parent.axes[idx]
    config = Configuration(
        cell=Cell(spec.dim, edge, periodic=False),
        species=parent.species,
        centers=kept_centers,
        axes=kept_axes,
        species_meta=_meta(spec, seed,
                           parent_size=parent_spec.size,
                           parent_particles=len(parent),
                           parent_phi=parent.species_meta.get("target_phi")),
        non_overlapping=True,
    )
    return config


def draw_poisson_periodized(spec: ProtocolSpec, seed: int) -> Configuration:
    """Periodized draw with Poisson-distributed particle count.

    N ~ Poisson(K^d); the radius is rescaled so N particles meet the
    target fraction exactly.  Draws the mechanical contraction cannot
    realize are redrawn with a derived seed up to the retry cap.
    """
    if spec.shape == "spherocylinder":
        raise ValueError("the Poisson count variant applies to disks/spheres")
    mean_count = spec.size ** spec.dim
    attempts = []
    for attempt in range(spec.poisson_retry_cap):
        sub_seed = derive_seed(seed, "poisson-attempt", attempt)
        rng = make_rng(sub_seed)
        count = int(rng.poisson(mean_count))
        if count == 0:
            attempts.append((0, "empty draw"))
            continue
        species = species_for_count(spec.shape, spec.phi, count, spec.edge)
        params = _params(spec, sub_seed)
        config, report = mcm_pack(Cell(spec.dim, spec.edge), species, params)
        if report.success:
            config.species_meta.update(_meta(
                spec, seed, poisson_count=count, poisson_attempts=attempt + 1,
                retries=[list(a) for a in attempts],
            ))
            return config
        attempts.append((count, report.failure_reason))
    raise PackingError(
        f"poisson draw infeasible after {spec.poisson_retry_cap} attempts "
        f"(seed={seed}): {attempts}"
    )


def draw(spec: ProtocolSpec, seed: int) -> Configuration:
    """Dispatch on the protocol."""
    if spec.protocol == "periodized":
        return draw_periodized(spec, seed)
    if spec.protocol == "snapshot":
        return draw_snapshot(spec, seed)
    return draw_poisson_periodized(spec, seed)
