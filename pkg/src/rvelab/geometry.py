"""Periodic cells, particle shapes, distance kernels and O(N) neighbor search.

Conventions used throughout the package:

* cells are axis-aligned squares/cubes ``[0, L)^d`` with a single edge length;
* all particles of a configuration belong to one species (same shape, same
  size);
* coordinates of particles on periodic cells are stored wrapped into
  ``[0, L)``.  Snapshot (non-periodic) configurations may carry centers
  outside the cell: those particles are cut at rasterization time.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Cell",
    "Species",
    "Particle",
    "Configuration",
    "NeighborIndex",
    "wrap_coords",
    "periodic_delta",
    "periodic_distance",
    "segment_segment_closest",
    "segment_segment_distance",
    "pair_gap",
    "overlap_indicator",
    "build_neighbor_index",
    "analytic_volume_fraction",
    "save_configuration",
    "load_configuration",
]

_AXIS_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Cell:
    """A square (d=2) or cubic (d=3) cell of edge length ``edge``."""

    dim: int
    edge: float
    periodic: bool = True

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"cell dimension must be 2 or 3, got {self.dim}")
        if not self.edge > 0:
            raise ValueError(f"cell edge must be positive, got {self.edge}")

    @property
    def volume(self) -> float:
        return self.edge**self.dim


@dataclass(frozen=True)
class Species:
    """Shape and size shared by all particles of a configuration.

    ``kind`` is one of ``"disk"``, ``"sphere"``, ``"spherocylinder"``.
    For spherocylinders ``length`` is the axis length between the cap
    centers; ``caps`` selects whether the spherical end caps count towards
    volume and rasterization (fiber composites drop them and keep the
    cylinder only).
    """

    kind: str
    radius: float
    length: float | None = None
    caps: bool = False

    def __post_init__(self):
        if self.kind not in ("disk", "sphere", "spherocylinder"):
            raise ValueError(f"unknown species kind {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("particle radius must be positive")
        if self.kind == "spherocylinder":
            if self.length is None or not self.length > 0:
                raise ValueError("spherocylinder needs a positive length")
        elif self.length is not None:
            raise ValueError(f"{self.kind} does not take a length")

    @property
    def dim(self) -> int:
        return 2 if self.kind == "disk" else 3

    def particle_volume(self) -> float:
        """Volume (area in 2D) of a single particle."""
        r = self.radius
        if self.kind == "disk":
            return math.pi * r**2
        if self.kind == "sphere":
            return 4.0 / 3.0 * math.pi * r**3
        vol = math.pi * r**2 * self.length
        if self.caps:
            vol += 4.0 / 3.0 * math.pi * r**3
        return vol


@dataclass(frozen=True)
class Particle:
    """A single particle: species plus placement."""

    species: Species
    center: np.ndarray
    axis: np.ndarray | None = None

    def __post_init__(self):
        if self.species.kind == "spherocylinder":
            if self.axis is None:
                raise ValueError("spherocylinder particle needs an axis")
            norm = float(np.linalg.norm(self.axis))
            if abs(norm - 1.0) > _AXIS_UNIT_TOL:
                raise ValueError(f"axis must be a unit vector, |axis|={norm}")
        elif self.axis is not None:
            raise ValueError(f"{self.species.kind} does not take an axis")


@dataclass
class Configuration:
    """A cell plus the particles living in it (single species).

    ``species_meta`` records the generating parameters (target volume
    fraction, isolation factor, protocol provenance, ...).  The
    ``non_overlapping`` flag asserts that the inflated overlap energy
    vanishes; operations requiring exact volume bookkeeping check it.
    """

    cell: Cell
    species: Species
    centers: np.ndarray
    axes: np.ndarray | None = None
    species_meta: dict = field(default_factory=dict)
    non_overlapping: bool = False

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        if self.centers.size == 0:
            self.centers = self.centers.reshape(0, self.cell.dim)
        if self.centers.shape[1] != self.cell.dim:
            raise ValueError(
                f"centers have dimension {self.centers.shape[1]}, cell has {self.cell.dim}"
            )
        if self.species.dim != self.cell.dim:
            raise ValueError(f"{self.species.kind} requires a {self.species.dim}D cell")
        if self.species.kind == "spherocylinder":
            if self.axes is None or len(self.axes) != len(self.centers):
                raise ValueError("spherocylinder configuration needs one axis per particle")
            self.axes = np.asarray(self.axes, dtype=float).reshape(len(self.centers), 3)
            norms = np.linalg.norm(self.axes, axis=1)
            if self.axes.size and np.max(np.abs(norms - 1.0)) > _AXIS_UNIT_TOL:
                raise ValueError("spherocylinder axes must be unit vectors")
        if self.cell.periodic and len(self.centers):
            lo, hi = self.centers.min(), self.centers.max()
            if lo < 0.0 or hi >= self.cell.edge:
                raise ValueError("periodic configuration centers must lie in [0, L)")

    def __len__(self) -> int:
        return len(self.centers)

    def particle(self, i: int) -> Particle:
        axis = None if self.axes is None else self.axes[i]
        return Particle(self.species, self.centers[i], axis)

    @property
    def particles(self) -> list[Particle]:
        return [self.particle(i) for i in range(len(self))]


def wrap_coords(x: np.ndarray, edge: float) -> np.ndarray:
    """Wrap coordinates into the canonical representative ``[0, L)``."""
    out = np.mod(x, edge)
    # mod can return L for inputs within one ulp below 0
    out[out >= edge] = 0.0
    return out


def periodic_delta(a: np.ndarray, b: np.ndarray, cell: Cell) -> np.ndarray:
    """Difference ``a - b`` with each coordinate wrapped into [-L/2, L/2]."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if cell.periodic:
        d = d - cell.edge * np.round(d / cell.edge)
    return d


def periodic_distance(a, b, cell: Cell) -> float:
    """Minimum distance between ``a`` and ``b`` over all periodic images.

    Falls back to the plain Euclidean distance when the cell is not
    periodic.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != cell.dim or b.shape[-1] != cell.dim:
        raise ValueError("point dimension does not match the cell")
    return float(np.linalg.norm(periodic_delta(a, b, cell), axis=-1))


def segment_segment_closest(p0, d0, p1, d1):
    """Closest approach of two segments, vectorized over leading axes.

    Segments are given by midpoint ``p`` and half-extent vector ``d`` (the
    segment is ``p + t*d`` for ``t`` in [-1, 1]).  Returns ``(dist, diff,
    s, t)`` where ``diff`` is the difference of the closest points (point
    on segment 0 minus point on segment 1) attained at parameters ``s``
    (segment 0) and ``t`` (segment 1).  Uses the standard clamped
    quadratic minimization with a robust parallel branch.
    """
    p0 = np.asarray(p0, dtype=float)
    d0 = np.asarray(d0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    d1 = np.asarray(d1, dtype=float)
    r = p0 - p1
    a = np.sum(d0 * d0, axis=-1)
    b = np.sum(d0 * d1, axis=-1)
    c = np.sum(d1 * d1, axis=-1)
    e = np.sum(d0 * r, axis=-1)
    f = np.sum(d1 * r, axis=-1)
    det = a * c - b * b
    eps = 1e-12 * np.maximum(a * c, 1e-300)
    parallel = det <= eps
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(parallel, 0.0, (b * f - c * e) / np.where(det == 0, 1.0, det))
    s = np.clip(s, -1.0, 1.0)
    t = np.where(c > 0, (b * s + f) / np.where(c == 0, 1.0, c), 0.0)
    t_cl = np.clip(t, -1.0, 1.0)
    # if t required clamping, re-minimize s for fixed t
    s = np.where(t != t_cl,
                 np.clip(np.where(a > 0, (b * t_cl - e) / np.where(a == 0, 1.0, a), 0.0), -1.0, 1.0),
                 s)
    t = t_cl
    diff = r + s[..., None] * d0 - t[..., None] * d1
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(parallel):
        alt = _parallel_segment_closest(r, d0, d1, a, c)
        alt_dist, alt_diff, alt_s, alt_t = alt
        better = parallel & (alt_dist < dist)
        dist = np.where(better, alt_dist, dist)
        diff = np.where(better[..., None], alt_diff, diff)
        s = np.where(better, alt_s, s)
        t = np.where(better, alt_t, t)
    return dist, diff, s, t


def segment_segment_distance(p0, d0, p1, d1):
    """Minimum distance between two segments (see segment_segment_closest)."""
    dist = segment_segment_closest(p0, d0, p1, d1)[0]
    if dist.ndim == 0:
        return float(dist)
    return dist


def _parallel_segment_closest(r, d0, d1, a, c):
    """Closest approach for (near-)parallel segments: scan both endpoints
    of each segment against the other segment."""
    best = best_diff = best_s = best_t = None
    for sgn in (-1.0, 1.0):
        # endpoint p1 + sgn*d1 of segment 1 against segment 0
        q = r - sgn * d1
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(a > 0, -np.sum(d0 * q, axis=-1) / np.where(a == 0, 1.0, a), 0.0)
        s = np.clip(s, -1.0, 1.0)
        diff = q + s[..., None] * d0
        dd = np.sqrt(np.sum(diff * diff, axis=-1))
        tt = np.full_like(dd, sgn)
        if best is None:
            best, best_diff, best_s, best_t = dd, diff, s, tt
        else:
            better = dd < best
            best = np.where(better, dd, best)
            best_diff = np.where(better[..., None], diff, best_diff)
            best_s = np.where(better, s, best_s)
            best_t = np.where(better, tt, best_t)
    for sgn in (-1.0, 1.0):
        # endpoint p0 + sgn*d0 of segment 0 against segment 1
        q = r + sgn * d0
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(c > 0, np.sum(d1 * q, axis=-1) / np.where(c == 0, 1.0, c), 0.0)
        t = np.clip(t, -1.0, 1.0)
        diff = q - t[..., None] * d1
        dd = np.sqrt(np.sum(diff * diff, axis=-1))
        better = dd < best
        best = np.where(better, dd, best)
        best_diff = np.where(better[..., None], diff, best_diff)
        best_s = np.where(better, np.full_like(dd, sgn), best_s)
        best_t = np.where(better, t, best_t)
    return best, best_diff, best_s, best_t


def _image_offsets(dim: int, edge: float) -> np.ndarray:
    shifts = np.array([-edge, 0.0, edge])
    grids = np.meshgrid(*([shifts] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def pair_gap(p: Particle, q: Particle, cell: Cell) -> float:
    """Center distance for disks/spheres, minimum axis-segment distance for
    spherocylinders, both periodized over the cell.

    Spherocylinder distances are minimized over the 3^d wrapped images of
    one particle; exact as long as particle extent stays below the cell
    edge (enforced at generation time).
    """
    if p.species.kind != q.species.kind:
        raise ValueError("pair_gap requires particles of the same shape kind")
    if p.species.kind != "spherocylinder":
        return periodic_distance(p.center, q.center, cell)
    h_p = 0.5 * p.species.length
    h_q = 0.5 * q.species.length
    dp = h_p * np.asarray(p.axis, dtype=float)
    dq = h_q * np.asarray(q.axis, dtype=float)
    base = np.asarray(q.center, dtype=float)
    if cell.periodic:
        delta = periodic_delta(base, p.center, cell)
        images = np.asarray(p.center) + delta + _image_offsets(cell.dim, cell.edge)
    else:
        images = base[None, :]
    dists = segment_segment_distance(
        np.broadcast_to(np.asarray(p.center, dtype=float), images.shape),
        np.broadcast_to(dp, images.shape),
        images,
        np.broadcast_to(dq, images.shape),
    )
    return float(np.min(dists))


def overlap_indicator(p: Particle, q: Particle, cell: Cell, effective_radius: float) -> float:
    """Macauley bracket ``max(0, 2*r_eff - gap)``; zero iff the particles
    inflated to ``effective_radius`` do not overlap."""
    if effective_radius < p.species.radius:
        raise ValueError("effective radius must not deflate the particle")
    return max(0.0, 2.0 * effective_radius - pair_gap(p, q, cell))


class NeighborIndex:
    """Cell-linked bins over a configuration for O(N) neighbor queries.

    Bins have edge >= the interaction range, so all particles within
    ``range`` of a point are found in the 3^d bins around it.  When fewer
    than three bins fit per axis the index degrades to all-pairs candidate
    lists (documented fallback, still correct).
    """

    def __init__(self, centers: np.ndarray, cell: Cell, range_: float):
        if not range_ > 0:
            raise ValueError("interaction range must be positive")
        self.cell = cell
        self.range = float(range_)
        self.centers = np.ascontiguousarray(centers, dtype=float)
        n = len(self.centers)
        edge = cell.edge
        nbins = max(1, int(edge / range_))
        self.all_pairs = nbins < 3
        self.nbins = 1 if self.all_pairs else nbins
        b = self.nbins
        if self.all_pairs:
            self._order = np.arange(n)
            self._starts = np.array([0, n])
            return
        ib = np.floor(self.centers / edge * b).astype(np.int64)
        np.clip(ib, 0, b - 1, out=ib)
        flat = ib[:, 0]
        for k in range(1, cell.dim):
            flat = flat * b + ib[:, k]
        counts = np.bincount(flat, minlength=b**cell.dim)
        starts = np.zeros(len(counts) + 1, dtype=np.int64)
        np.cumsum(counts, out=starts[1:])
        self._order = np.argsort(flat, kind="stable")
        self._starts = starts
        self._flat = flat

    def _bin_of_point(self, point: np.ndarray) -> np.ndarray:
        b = self.nbins
        ib = np.floor(np.asarray(point, dtype=float) / self.cell.edge * b).astype(np.int64)
        return np.clip(ib, 0, b - 1)

    def candidates_near(self, point) -> np.ndarray:
        """Indices of all particles in the 3^d bins around ``point``
        (superset of every particle within ``range``)."""
        if self.all_pairs:
            return self._order
        b = self.nbins
        ib = self._bin_of_point(point)
        dim = self.cell.dim
        offs = np.array([-1, 0, 1])
        axes = []
        for k in range(dim):
            vals = ib[k] + offs
            if self.cell.periodic:
                vals = np.unique(np.mod(vals, b))
            else:
                vals = np.unique(np.clip(vals, 0, b - 1))
            axes.append(vals)
        grids = np.meshgrid(*axes, indexing="ij")
        flat = grids[0].ravel()
        for k in range(1, dim):
            flat = flat * b + grids[k].ravel()
        parts = [self._order[self._starts[f]:self._starts[f + 1]] for f in np.unique(flat)]
        if not parts:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(parts)

    def query(self, point, radius: float | None = None) -> np.ndarray:
        """Indices of particles with periodic distance <= radius from
        ``point`` (radius defaults to the index range)."""
        r = self.range if radius is None else radius
        if r > self.range:
            raise ValueError("query radius exceeds the index range")
        cand = self.candidates_near(point)
        if len(cand) == 0:
            return cand
        delta = self.centers[cand] - np.asarray(point, dtype=float)
        if self.cell.periodic:
            delta -= self.cell.edge * np.round(delta / self.cell.edge)
        keep = np.einsum("ij,ij->i", delta, delta) <= r * r
        return cand[keep]

    def neighbors_of(self, i: int, radius: float | None = None) -> np.ndarray:
        """Particles within radius of particle ``i`` (``i`` excluded)."""
        out = self.query(self.centers[i], radius)
        return out[out != i]

    def candidate_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """All unordered candidate pairs (i, j), each exactly once.

        Guaranteed to contain every pair with periodic distance <= range;
        may contain farther pairs (callers filter by actual distance).
        """
        n = len(self.centers)
        if self.all_pairs or n < 2:
            iu, ju = np.triu_indices(n, k=1)
            return iu.astype(np.int64), ju.astype(np.int64)
        b = self.nbins
        dim = self.cell.dim
        starts, order = self._starts, self._order
        counts = np.diff(starts)
        nb_total = b**dim
        bins_multi = np.stack(
            np.unravel_index(np.arange(nb_total), (b,) * dim), axis=-1
        )
        lefts_all, rights_all = [], []
        offsets = _half_space_offsets(dim)
        for off in offsets:
            if np.all(off == 0):
                lefts, rights = _intra_bin_pairs(starts, counts)
            else:
                nb_multi = bins_multi + off
                if self.cell.periodic:
                    nb_multi = np.mod(nb_multi, b)
                else:
                    bad = np.any((nb_multi < 0) | (nb_multi >= b), axis=1)
                    nb_multi = np.clip(nb_multi, 0, b - 1)
                nb_flat = nb_multi[:, 0]
                for k in range(1, dim):
                    nb_flat = nb_flat * b + nb_multi[:, k]
                if not self.cell.periodic:
                    pair_counts = np.where(bad, 0, counts * counts[nb_flat])
                else:
                    pair_counts = counts * counts[nb_flat]
                lefts, rights = _cross_bin_pairs(starts, counts, nb_flat, pair_counts)
            if len(lefts):
                lefts_all.append(order[lefts])
                rights_all.append(order[rights])
        if not lefts_all:
            return (np.empty(0, dtype=np.int64),) * 2
        return np.concatenate(lefts_all), np.concatenate(rights_all)


def _half_space_offsets(dim: int) -> np.ndarray:
    """Offsets o in {-1,0,1}^d with o lexicographically >= 0, so each
    unordered bin pair appears exactly once."""
    offs = np.stack(
        np.meshgrid(*([np.array([-1, 0, 1])] * dim), indexing="ij"), axis=-1
    ).reshape(-1, dim)
    keep = []
    for o in offs:
        nz = np.nonzero(o)[0]
        if len(nz) == 0 or o[nz[0]] > 0:
            keep.append(o)
    return np.array(keep)


def _intra_bin_pairs(starts, counts):
    """(sorted-position) index pairs within each bin, i < j."""
    sel = np.nonzero(counts >= 2)[0]
    if len(sel) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    tot = counts[sel] * (counts[sel] - 1) // 2
    lefts = np.empty(int(tot.sum()), dtype=np.int64)
    rights = np.empty_like(lefts)
    pos = 0
    for bidx, c in zip(sel, counts[sel]):
        iu, ju = np.triu_indices(c, k=1)
        m = len(iu)
        lefts[pos:pos + m] = starts[bidx] + iu
        rights[pos:pos + m] = starts[bidx] + ju
        pos += m
    return lefts, rights


def _cross_bin_pairs(starts, counts, nb_flat, pair_counts):
    """(sorted-position) index pairs between each bin and its neighbor."""
    sel = np.nonzero(pair_counts > 0)[0]
    if len(sel) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    c_left = counts[sel]
    c_right = counts[nb_flat[sel]]
    block = c_left * c_right
    total = int(block.sum())
    block_start = np.zeros(len(sel), dtype=np.int64)
    np.cumsum(block[:-1], out=block_start[1:])
    t = np.arange(total, dtype=np.int64) - np.repeat(block_start, block)
    cr = np.repeat(c_right, block)
    lefts = np.repeat(starts[sel], block) + t // cr
    rights = np.repeat(starts[nb_flat[sel]], block) + t % cr
    return lefts, rights


def build_neighbor_index(config: Configuration, range_: float) -> NeighborIndex:
    """Cell-linked-list index over the configuration's centers."""
    return NeighborIndex(config.centers, config.cell, range_)


def analytic_volume_fraction(config: Configuration) -> float:
    """Exact particle volume fraction; requires a non-overlapping
    configuration (overlaps would double-count)."""
    if len(config) == 0:
        return 0.0
    if not config.non_overlapping:
        raise ValueError("analytic volume fraction needs a non-overlapping configuration")
    return len(config) * config.species.particle_volume() / config.cell.volume


def configuration_to_dict(config: Configuration) -> dict:
    rec = {
        "dim": config.cell.dim,
        "edge": config.cell.edge,
        "periodic": config.cell.periodic,
        "shape": config.species.kind,
        "radius": config.species.radius,
        "centers": config.centers.tolist(),
        "species_meta": config.species_meta,
        "non_overlapping": config.non_overlapping,
    }
    if config.species.kind == "spherocylinder":
        rec["length"] = config.species.length
        rec["caps"] = config.species.caps
        rec["axes"] = config.axes.tolist()
    return rec


def configuration_from_dict(rec: dict) -> Configuration:
    cell = Cell(int(rec["dim"]), float(rec["edge"]), bool(rec.get("periodic", True)))
    species = Species(
        rec["shape"],
        float(rec["radius"]),
        length=rec.get("length"),
        caps=bool(rec.get("caps", False)),
    )
    centers = np.asarray(rec["centers"], dtype=float).reshape(-1, cell.dim)
    axes = rec.get("axes")
    if axes is not None:
        axes = np.asarray(axes, dtype=float)
    return Configuration(
        cell=cell,
        species=species,
        centers=centers,
        axes=axes,
        species_meta=dict(rec.get("species_meta", {})),
        non_overlapping=bool(rec.get("non_overlapping", False)),
    )


def save_configuration(config: Configuration, path) -> None:
    Path(path).write_text(json.dumps(configuration_to_dict(config)))


def load_configuration(path) -> Configuration:
    return configuration_from_dict(json.loads(Path(path).read_text()))
