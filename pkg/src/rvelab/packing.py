"""Non-overlapping particle packing at a target volume fraction.

Three generators:

* ``mcm_pack`` -- mechanical contraction: uniform initial centers at a low
  volume fraction, then alternate gradient-descent overlap removal and
  contraction of cell + centers along an increasing fraction schedule;
* ``sam_pack`` -- sequential addition and migration for spherocylinders:
  fibers are added in batches to a fixed cell, with an isotropy penalty on
  the orientation tensor and overlap removal after each batch;
* ``rsa_pack`` -- random sequential adsorption (uniform proposals accepted
  iff isolated), kept as the classical baseline.

Isolation between particles is realized by inflating the radius by
``isolation_factor`` inside the overlap indicator; all overlap checks use
periodic distances.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import (
    Cell,
    Configuration,
    NeighborIndex,
    Species,
    segment_segment_closest,
    wrap_coords,
)

__all__ = [
    "PackingParams",
    "PackingReport",
    "overlap_energy",
    "overlap_gradient",
    "remove_overlaps",
    "mcm_pack",
    "sam_pack",
    "rsa_pack",
    "species_for_count",
    "count_for_species",
    "default_schedule",
    "make_rng",
]


@dataclass
class PackingParams:
    """Knobs of the packing generators.

    ``energy_tol`` defaults to ``1e-20 * (2 r_eff)^2`` per particle pair.
    Each particle's descent step is ``step_size / max(its overlap count,
    1)`` times its raw gradient, so an isolated overlapping pair separates
    to exact contact in one step at the default step size.
    """

    target_phi: float
    isolation_factor: float = 1.2
    phi_schedule: list[float] | None = None
    step_size: float = 1.0
    energy_tol: float | None = None
    max_iters: int = 20000
    seed: int = 0
    lambda_orientation: float = 1.0
    orientation_step: float = 0.5
    orientation_tol: float = 0.01
    proposal_budget: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.target_phi < 1.0:
            raise ValueError("target_phi must lie in [0, 1)")
        if self.isolation_factor < 1.0:
            raise ValueError("isolation_factor must be >= 1")
        if self.energy_tol is not None and self.energy_tol < 0:
            raise ValueError("energy_tol must be nonnegative")
        if self.phi_schedule is not None:
            sched = list(self.phi_schedule)
            if any(b <= a for a, b in zip(sched, sched[1:])):
                raise ValueError("phi_schedule must be strictly increasing")
            if abs(sched[-1] - self.target_phi) > 1e-12:
                raise ValueError("phi_schedule must end at target_phi")


@dataclass
class PackingReport:
    success: bool
    iterations: list[int] = field(default_factory=list)
    final_energy: float = 0.0
    wall_time: float = 0.0
    failure_reason: str | None = None
    extra: dict = field(default_factory=dict)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator; one independent stream per 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed)))


def default_schedule(kind: str, target_phi: float) -> list[float]:
    """10% contraction steps for disks/spheres, 5% for fibers."""
    if target_phi <= 0:
        return [target_phi]
    step = 0.10 if kind in ("disk", "sphere") else 0.05
    sched = []
    k = 1
    while k * step < target_phi - 1e-12:
        sched.append(k * step)
        k += 1
    sched.append(target_phi)
    return sched


def species_for_count(kind: str, phi: float, count: int, edge: float,
                      aspect: float = 20.0, caps: bool = False) -> Species:
    """Species whose ``count`` particles fill fraction ``phi`` of the cell
    exactly.  For spherocylinders the aspect ratio fixes length = aspect *
    diameter and the (cap-less) cylinder volume is used."""
    if count <= 0:
        raise ValueError("count must be positive")
    vol = phi * edge ** (2 if kind == "disk" else 3) / count
    if kind == "disk":
        return Species(kind, math.sqrt(vol / math.pi))
    if kind == "sphere":
        return Species(kind, (vol * 3.0 / (4.0 * math.pi)) ** (1.0 / 3.0))
    # cylinder volume pi r^2 l with l = 2 * aspect * r
    r = (vol / (2.0 * math.pi * aspect)) ** (1.0 / 3.0)
    return Species(kind, r, length=2.0 * aspect * r, caps=caps)


def count_for_species(kind: str, phi: float, species: Species, edge: float) -> int:
    """Particle count filling fraction ``phi``: nearest integer for
    disks/spheres, rounded up for fibers (their radius is then shrunk to
    hit ``phi`` exactly)."""
    vol = species.particle_volume()
    raw = phi * edge**species.dim / vol
    if kind == "spherocylinder":
        return int(math.ceil(raw - 1e-9))
    return int(round(raw))


def _pair_forces(centers, axes, species: Species, edge: float, two_r_eff: float):
    """Unified force interface: (energy, center gradient, axis gradient or
    None, per-particle overlap counts)."""
    if species.kind == "spherocylinder":
        return _segment_energy_gradient(
            centers, axes, 0.5 * species.length, edge, two_r_eff
        )
    w, g, mult = kernels.pair_energy_gradient(centers, edge, two_r_eff)
    return w, g, None, mult


_SEG_IMAGE_CACHE: dict[float, np.ndarray] = {}


def _segment_candidate_pairs(centers, axes, half_len, edge, two_r_eff):
    """Candidate fiber pairs via sample points along the axes.

    Points are spaced at most 2 * two_r_eff apart, so any pair with segment
    distance < two_r_eff has two sample points closer than 3 * two_r_eff;
    binning the points keeps the search O(N) even for fibers much longer
    than the interaction range.
    """
    n = len(centers)
    nseg = max(1, int(math.ceil(half_len / two_r_eff)))
    ts = np.linspace(-1.0, 1.0, nseg + 1)
    spacing = 2.0 * half_len / nseg
    pts = centers[:, None, :] + ts[None, :, None] * (half_len * axes)[:, None, :]
    pts = wrap_coords(pts.reshape(-1, 3), edge)
    owner = np.repeat(np.arange(n), len(ts))
    reach = two_r_eff + spacing
    index = NeighborIndex(pts, Cell(3, edge, True), reach)
    qi, qj = index.candidate_pairs()
    delta = pts[qi] - pts[qj]
    delta -= edge * np.round(delta / edge)
    close = np.einsum("ij,ij->i", delta, delta) <= reach * reach
    fi, fj = owner[qi[close]], owner[qj[close]]
    lo = np.minimum(fi, fj)
    hi = np.maximum(fi, fj)
    keep = lo != hi
    pairs = np.unique(lo[keep] * np.int64(n) + hi[keep])
    return pairs // n, pairs % n


def _segment_energy_gradient(centers, axes, half_len, edge, two_r_eff):
    """Overlap energy and gradients for spherocylinders.

    The Macauley bracket acts on the periodic minimum axis-segment
    distance.  Envelope differentiation at the closest points gives the
    gradient with respect to the centers and, in the length-scaled
    coordinates q_i = half_len * a_i, with respect to the axes.
    """
    centers = np.asarray(centers, dtype=float)
    axes = np.asarray(axes, dtype=float)
    n = len(centers)
    grad = np.zeros_like(centers)
    grad_axes = np.zeros_like(centers)
    mult0 = np.zeros(n, dtype=np.int64)
    if n < 2:
        return 0.0, grad, grad_axes, mult0
    pi, pj = _segment_candidate_pairs(centers, axes, half_len, edge, two_r_eff)
    if len(pi) == 0:
        return 0.0, grad, grad_axes, mult0
    offs = _SEG_IMAGE_CACHE.get(edge)
    if offs is None:
        shifts = np.array([-edge, 0.0, edge])
        g = np.meshgrid(shifts, shifts, shifts, indexing="ij")
        offs = np.stack([v.ravel() for v in g], axis=-1)
        _SEG_IMAGE_CACHE[edge] = offs
    dc = centers[pi] - centers[pj]
    dc -= edge * np.round(dc / edge)
    # segment i at the origin, images of segment j at -(dc + off); only
    # images whose centers are within reach can interact.  Every image
    # contact counts: fibers whose length approaches the cell edge can
    # touch one partner through several images at once.
    p1 = -(dc[:, None, :] + offs[None, :, :])
    reach = 2.0 * half_len + two_r_eff
    near = np.einsum("pij,pij->pi", p1, p1) < reach * reach
    rows_k, imgs_k = np.nonzero(near)
    p1_k = p1[rows_k, imgs_k]
    d0_k = (half_len * axes[pi])[rows_k]
    d1_k = (half_len * axes[pj])[rows_k]
    dist_k, diff_k, s_k, t_k = segment_segment_closest(
        np.zeros_like(p1_k), d0_k, p1_k, d1_k
    )
    hit_k = dist_k < two_r_eff
    energy = 0.0
    if np.any(hit_k):
        pi = pi[rows_k[hit_k]]
        pj = pj[rows_k[hit_k]]
        dist, diff, s, t = dist_k[hit_k], diff_k[hit_k], s_k[hit_k], t_k[hit_k]
        tiny = 1e-14 * two_r_eff
        degenerate = dist < tiny
        if np.any(degenerate):
            diff[degenerate] = 0.0
            diff[degenerate, 0] = tiny
            dist[degenerate] = tiny
        depth = two_r_eff - dist
        energy = 0.5 * float(np.sum(depth * depth))
        force = (depth / dist)[:, None] * diff
        for k in range(3):
            grad[:, k] -= np.bincount(pi, weights=force[:, k], minlength=n)
            grad[:, k] += np.bincount(pj, weights=force[:, k], minlength=n)
            grad_axes[:, k] -= np.bincount(pi, weights=s * force[:, k], minlength=n)
            grad_axes[:, k] += np.bincount(pj, weights=t * force[:, k], minlength=n)
        mult0 = np.bincount(pi, minlength=n) + np.bincount(pj, minlength=n)
    if 2.0 * half_len + two_r_eff > edge:
        w_self = _self_image_energy(axes, half_len, edge, two_r_eff, grad_axes, mult0)
        energy += w_self
    return energy, grad, grad_axes, mult0


_HALF_OFFSETS_3D: np.ndarray | None = None


def _self_image_energy(axes, half_len, edge, two_r_eff, grad_axes, mult):
    """Contacts of a fiber with its own periodic images (possible when the
    fiber length approaches the cell edge).  Translation leaves these
    invariant, so only the axis gradient receives contributions."""
    global _HALF_OFFSETS_3D
    if _HALF_OFFSETS_3D is None:
        offs = np.stack(np.meshgrid(*([np.array([-1, 0, 1])] * 3),
                                    indexing="ij"), axis=-1).reshape(-1, 3)
        keep = []
        for o in offs:
            nz = np.nonzero(o)[0]
            if len(nz) and o[nz[0]] > 0:
                keep.append(o)
        _HALF_OFFSETS_3D = np.array(keep, dtype=float)
    offs = _HALF_OFFSETS_3D * edge
    # prune to offsets a fiber can actually reach
    reach = 2.0 * half_len + two_r_eff
    offs = offs[np.linalg.norm(offs, axis=1) < reach]
    if len(offs) == 0:
        return 0.0
    n = len(axes)
    d = half_len * axes
    p0 = np.zeros((n, len(offs), 3))
    d0 = np.broadcast_to(d[:, None, :], p0.shape)
    p1 = np.broadcast_to(offs[None, :, :], p0.shape)
    dist, diff, s, t = segment_segment_closest(p0, d0, p1, d0)
    hit = dist < two_r_eff
    if not np.any(hit):
        return 0.0
    fi = np.nonzero(hit)[0]
    dist, diff, s, t = dist[hit], diff[hit], s[hit], t[hit]
    tiny = 1e-14 * two_r_eff
    dist = np.maximum(dist, tiny)
    depth = two_r_eff - dist
    force = (depth / dist)[:, None] * diff
    coeff = (s - t)[:, None] * force
    for k in range(3):
        np.add.at(grad_axes[:, k], fi, -coeff[:, k])
    np.add.at(mult, fi, 1)
    return 0.5 * float(np.sum(depth * depth))


def _default_tol(two_r_eff: float, n: int) -> float:
    npairs = max(1, n * (n - 1) // 2)
    return 1e-20 * two_r_eff**2 * npairs


def overlap_energy(config: Configuration, effective_radius: float) -> float:
    """Half the sum of squared overlap indicators over all particle pairs."""
    w, _, _, _ = _pair_forces(
        config.centers, config.axes, config.species, config.cell.edge,
        2.0 * effective_radius,
    )
    return w


def overlap_gradient(config: Configuration, effective_radius: float) -> np.ndarray:
    """Exact gradient of the overlap energy w.r.t. all particle centers."""
    _, g, _, _ = _pair_forces(
        config.centers, config.axes, config.species, config.cell.edge,
        2.0 * effective_radius,
    )
    return g


def _descend(centers, axes, species, edge, two_r_eff, tol, step_size, max_iters,
             rotate=False, orientation_target=None, orientation_step=0.0,
             flat_step=False):
    """Gradient descent on the overlap energy.

    By default the raw gradient is scaled per particle by
    step_size / max(overlap multiplicity, 1), so isolated overlapping pairs
    resolve in a single step.  ``flat_step`` applies step_size uniformly
    instead, which relaxes dense collective contact networks much faster.

    With ``rotate`` the spherocylinder axes follow their overlap gradient
    too (in length-scaled coordinates, renormalized each step), optionally
    combined with a micro-step of the orientation-isotropy penalty.
    Returns the final centers, axes, iteration count, energy and success.
    """
    x, a = centers, axes
    energy, grad, grad_axes, mult = _pair_forces(x, a, species, edge, two_r_eff)
    half = 0.5 * species.length if species.kind == "spherocylinder" else 1.0
    iters = 0
    while energy > tol and iters < max_iters:
        if flat_step:
            step = np.full(len(x), step_size)
        else:
            step = step_size / np.maximum(mult, 1)
        x = wrap_coords(x - step[:, None] * grad, edge)
        if rotate and grad_axes is not None:
            a = a - (step / half)[:, None] * grad_axes
            if orientation_target is not None and orientation_step > 0:
                misfit = orientation_tensor(a / np.linalg.norm(a, axis=1, keepdims=True))                     - orientation_target
                a = a - orientation_step * (a @ misfit)
            a = a / np.linalg.norm(a, axis=1, keepdims=True)
        energy, grad, grad_axes, mult = _pair_forces(x, a, species, edge, two_r_eff)
        iters += 1
    return x, a, iters, energy, energy <= tol


def remove_overlaps(config: Configuration, params: PackingParams):
    """Gradient-descent overlap removal at the inflated radius.

    Particles without overlap never move.  Exceeding ``max_iters`` yields a
    failure report with the configuration as-is, not an exception.
    """
    r_eff = params.isolation_factor * config.species.radius
    two_r_eff = 2.0 * r_eff
    tol = params.energy_tol
    if tol is None:
        tol = _default_tol(two_r_eff, len(config))
    t0 = time.perf_counter()
    x, axes, iters, energy, ok = _descend(
        config.centers, config.axes, config.species, config.cell.edge,
        two_r_eff, tol, params.step_size, params.max_iters,
    )
    report = PackingReport(
        success=ok,
        iterations=[iters],
        final_energy=energy,
        wall_time=time.perf_counter() - t0,
        failure_reason=None if ok else "overlap removal did not converge",
    )
    out = Configuration(
        cell=config.cell,
        species=config.species,
        centers=x,
        axes=axes,
        species_meta=dict(config.species_meta),
        non_overlapping=ok,
    )
    return out, report


def _as_cell(cell_hint, dim: int) -> Cell:
    if isinstance(cell_hint, Cell):
        return cell_hint
    return Cell(dim, float(cell_hint), periodic=True)


def mcm_pack(cell_hint, species: Species, params: PackingParams):
    """Mechanical contraction to ``params.target_phi``.

    The particle count is fixed by the species volume (and must make the
    target fraction exact); the cell is enlarged to the first schedule
    fraction, centers drawn uniformly, and cell + centers contract along
    the schedule with overlap removal after each contraction.
    """
    cell = _as_cell(cell_hint, species.dim)
    dim = cell.dim
    n = count_for_species(species.kind, params.target_phi, species, cell.edge)
    if params.target_phi <= 0 or n == 0:
        empty = Configuration(cell, species, np.zeros((0, dim)),
                              species_meta=_meta(params), non_overlapping=True)
        return empty, PackingReport(success=True)
    achieved = n * species.particle_volume() / cell.volume
    if abs(achieved / params.target_phi - 1.0) > 1e-9:
        raise ValueError(
            "species volume inconsistent with an integer particle count at "
            "the target fraction; derive the species via species_for_count()"
        )
    schedule = params.phi_schedule or default_schedule(species.kind, params.target_phi)
    rng = make_rng(params.seed)
    two_r_eff = 2.0 * params.isolation_factor * species.radius
    tol = params.energy_tol if params.energy_tol is not None else _default_tol(two_r_eff, n)
    t0 = time.perf_counter()

    edges = [cell.edge * (params.target_phi / phi) ** (1.0 / dim) for phi in schedule]
    x = rng.uniform(0.0, edges[0], size=(n, dim))
    report = PackingReport(success=True)
    energy = 0.0
    stage_edge = edges[0]
    for stage, (phi_k, edge_k) in enumerate(zip(schedule, edges)):
        if stage > 0:
            x = x * (edge_k / edges[stage - 1])
        stage_edge = edge_k
        x, _, iters, energy, ok = _descend(
            x, None, species, edge_k, two_r_eff, tol, params.step_size,
            params.max_iters,
        )
        report.iterations.append(iters)
        if not ok:
            report.success = False
            report.failure_reason = (
                f"contraction step {stage + 1}/{len(schedule)} "
                f"(phi={phi_k:.4g}) did not converge"
            )
            break
    report.final_energy = energy
    report.wall_time = time.perf_counter() - t0
    # on failure the configuration lives on the cell of the failed stage
    cell_out = cell if report.success else Cell(dim, stage_edge, periodic=True)
    config = Configuration(
        cell=cell_out,
        species=species,
        centers=wrap_coords(x, cell_out.edge),
        species_meta=_meta(params),
        non_overlapping=report.success,
    )
    return config, report


def _meta(params: PackingParams, **extra) -> dict:
    meta = {
        "target_phi": params.target_phi,
        "isolation_factor": params.isolation_factor,
        "seed": int(params.seed),
    }
    meta.update(extra)
    return meta


def _random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def orientation_tensor(axes: np.ndarray) -> np.ndarray:
    """Empirical second-order orientation tensor (mean outer product)."""
    axes = np.asarray(axes, dtype=float)
    return axes.T @ axes / len(axes)


def _equilibrate_orientations(axes, target, step, tol, max_steps=2000):
    """Descent on the isotropy penalty: axes move against the orientation-
    tensor misfit, renormalized after every step."""
    a = axes
    for _ in range(max_steps):
        misfit = orientation_tensor(a) - target
        if np.max(np.abs(misfit)) <= tol:
            break
        a = a - step * (a @ misfit)
        a /= np.linalg.norm(a, axis=1, keepdims=True)
    return a


def sam_pack(cell_hint, species: Species, params: PackingParams,
             orientation_target: np.ndarray | None = None):
    """Sequential addition and migration for spherocylinders.

    Fibers arrive in batches following the fraction schedule on a cell of
    fixed size.  Each batch is equilibrated: first the isotropy penalty on
    the second-order orientation tensor, then translational overlap removal
    at the inflated radius.  The nominal radius is shrunk (at fixed length)
    so the integer fiber count realizes the target fraction exactly.
    """
    if species.kind != "spherocylinder":
        raise ValueError("sam_pack expects a spherocylinder species")
    cell = _as_cell(cell_hint, 3)
    if species.length > cell.edge + 1e-12:
        raise ValueError("fiber length must not exceed the cell edge")
    if orientation_target is None:
        orientation_target = np.eye(3) / 3.0
    if params.target_phi <= 0:
        empty = Configuration(cell, species, np.zeros((0, 3)),
                              axes=np.zeros((0, 3)),
                              species_meta=_meta(params), non_overlapping=True)
        return empty, PackingReport(success=True)
    n_final = count_for_species("spherocylinder", params.target_phi, species, cell.edge)
    # shrink the radius so n_final fibers hit target_phi exactly
    radius = math.sqrt(
        params.target_phi * cell.volume / (n_final * math.pi * species.length)
    )
    packed_species = Species("spherocylinder", radius, length=species.length,
                             caps=species.caps)
    schedule = params.phi_schedule or default_schedule("spherocylinder", params.target_phi)
    counts = [
        count_for_species("spherocylinder", phi, packed_species, cell.edge)
        for phi in schedule
    ]
    counts[-1] = n_final
    rng = make_rng(params.seed)
    two_r_eff = 2.0 * params.isolation_factor * radius
    tol = params.energy_tol if params.energy_tol is not None else _default_tol(two_r_eff, n_final)
    t0 = time.perf_counter()
    centers = np.zeros((0, 3))
    axes = np.zeros((0, 3))
    report = PackingReport(success=True)
    energy = 0.0
    migrations = 0
    ramp = (0.7, 0.85, 1.0)
    for stage, n_k in enumerate(counts):
        add = n_k - len(centers)
        if add > 0:
            centers = np.vstack([centers, rng.uniform(0.0, cell.edge, size=(add, 3))])
            axes = np.vstack([axes, _random_unit_vectors(rng, add)])
        axes = _equilibrate_orientations(
            axes, orientation_target, params.orientation_step,
            0.5 * params.orientation_tol,
        )
        # each batch relaxes along an inflation ramp; within a ramp stage
        # the descent runs in chunks, and only a stalled descent (energy no
        # longer contracting) migrates the worst-overlapped fibers to
        # fresh uniform positions and orientations
        stage_iters = 0
        ok = False
        for factor in ramp:
            two_stage = factor * two_r_eff
            budget = params.max_iters
            chunk = 500
            ok = False
            prev_energy = np.inf
            while budget > 0:
                # dense fiber contact networks relax collectively: uniform
                # moderate steps converge orders of magnitude faster than
                # per-contact throttling here
                centers, axes, iters, energy, ok = _descend(
                    centers, axes, packed_species, cell.edge, two_stage,
                    tol if factor == 1.0 else tol / factor**2,
                    0.7 * params.step_size, min(chunk, budget),
                    rotate=True, orientation_target=orientation_target,
                    orientation_step=0.1 * params.orientation_step,
                    flat_step=True,
                )
                stage_iters += iters
                budget -= iters
                if ok or budget <= 0:
                    break
                if energy > 0.05 * prev_energy:
                    _, _, _, mult = _pair_forces(centers, axes, packed_species,
                                                 cell.edge, two_stage)
                    stuck = np.nonzero(np.asarray(mult) > 0)[0]
                    worst = stuck[np.argsort(np.asarray(mult)[stuck])]
                    worst = worst[-max(1, len(stuck) // 8):]
                    centers = centers.copy()
                    axes = axes.copy()
                    centers[worst] = rng.uniform(0.0, cell.edge, size=(len(worst), 3))
                    axes[worst] = _random_unit_vectors(rng, len(worst))
                    migrations += len(worst)
                    prev_energy = np.inf
                else:
                    prev_energy = energy
            if not ok:
                break
        report.iterations.append(stage_iters)
        if not ok:
            report.success = False
            report.failure_reason = (
                f"migration after batch {stage + 1}/{len(counts)} did not converge"
            )
            break
    report.final_energy = energy
    report.wall_time = time.perf_counter() - t0
    misfit = float(np.max(np.abs(orientation_tensor(axes) - orientation_target)))
    report.extra["orientation_misfit"] = misfit
    report.extra["migrations"] = migrations
    config = Configuration(
        cell=cell,
        species=packed_species,
        centers=wrap_coords(centers, cell.edge),
        axes=axes,
        species_meta=_meta(params, nominal_radius=species.radius,
                           fiber_count=int(len(centers))),
        non_overlapping=report.success,
    )
    return config, report


class _IncrementalBins:
    """Mutable periodic bin structure for sequential insertion."""

    def __init__(self, edge: float, dim: int, range_: float):
        self.edge = edge
        self.dim = dim
        b = max(1, int(edge / range_))
        self.b = 1 if b < 3 else b
        self.bins: dict[tuple, list] = {}
        self.points: list[np.ndarray] = []

    def _key(self, p):
        ib = np.floor(p / self.edge * self.b).astype(int)
        return tuple(np.clip(ib, 0, self.b - 1))

    def neighbors(self, p) -> np.ndarray:
        if self.b == 1:
            cands = self.points
        else:
            ib = np.array(self._key(p))
            cands = []
            for off in np.ndindex(*(3,) * self.dim):
                key = tuple((ib + np.array(off) - 1) % self.b)
                cands.extend(self.bins.get(key, ()))
        if not cands:
            return np.empty((0, self.dim))
        return np.asarray(cands)

    def insert(self, p):
        self.points.append(p)
        if self.b > 1:
            self.bins.setdefault(self._key(p), []).append(p)


def rsa_pack(cell_hint, species: Species, params: PackingParams):
    """Random sequential adsorption: uniform proposals accepted iff no
    inflated overlap with previously accepted particles.  Gives up after a
    proposal budget, reporting the fraction achieved."""
    if species.kind == "spherocylinder":
        raise ValueError("rsa_pack supports disks and spheres")
    cell = _as_cell(cell_hint, species.dim)
    dim = cell.dim
    n_target = count_for_species(species.kind, params.target_phi, species, cell.edge)
    if params.target_phi <= 0 or n_target == 0:
        empty = Configuration(cell, species, np.zeros((0, dim)),
                              species_meta=_meta(params), non_overlapping=True)
        return empty, PackingReport(success=True)
    rng = make_rng(params.seed)
    two_r_eff = 2.0 * params.isolation_factor * species.radius
    budget = params.proposal_budget or max(100_000, 2000 * n_target)
    bins = _IncrementalBins(cell.edge, dim, two_r_eff)
    t0 = time.perf_counter()
    accepted = 0
    proposals = 0
    t2 = two_r_eff * two_r_eff
    while accepted < n_target and proposals < budget:
        p = rng.uniform(0.0, cell.edge, size=dim)
        proposals += 1
        cands = bins.neighbors(p)
        if len(cands):
            delta = cands - p
            delta -= cell.edge * np.round(delta / cell.edge)
            if np.min(np.einsum("ij,ij->i", delta, delta)) < t2:
                continue
        bins.insert(p)
        accepted += 1
    ok = accepted == n_target
    centers = np.asarray(bins.points) if bins.points else np.zeros((0, dim))
    achieved_phi = accepted * species.particle_volume() / cell.volume
    report = PackingReport(
        success=ok,
        iterations=[proposals],
        final_energy=0.0,
        wall_time=time.perf_counter() - t0,
        failure_reason=None if ok else
        f"proposal budget exhausted at phi={achieved_phi:.4f} "
        f"({accepted}/{n_target} particles)",
        extra={"achieved_phi": achieved_phi},
    )
    config = Configuration(
        cell=cell,
        species=species,
        centers=centers,
        species_meta=_meta(params),
        non_overlapping=True,
    )
    return config, report
