"""Pure-NumPy implementations of the hot kernels.

Same call signatures as the compiled twin ``_kernels_cy``; selected as the
fallback backend when the extension is unavailable (see ``kernels``).
Results agree with the compiled kernels to floating-point roundoff.
"""
from __future__ import annotations

import numpy as np

from .geometry import Cell, NeighborIndex

_TINY_REL = 1e-14


def pair_energy_gradient(centers: np.ndarray, edge: float, two_r_eff: float):
    """Overlap energy, its gradient w.r.t. all centers, and the per-particle
    overlap counts, on a periodic cell.

    Energy is 0.5 * sum over pairs of max(0, 2*r_eff - dist)^2 with the
    periodic center distance; candidate pairs come from cell-linked bins.
    """
    centers = np.asarray(centers, dtype=float)
    n, dim = centers.shape
    grad = np.zeros_like(centers)
    if n < 2:
        return 0.0, grad, np.zeros(n, dtype=np.int64)
    index = NeighborIndex(centers, Cell(dim, edge, True), two_r_eff)
    pi, pj = index.candidate_pairs()
    if len(pi) == 0:
        return 0.0, grad, np.zeros(n, dtype=np.int64)
    delta = centers[pi] - centers[pj]
    delta -= edge * np.round(delta / edge)
    dist2 = np.einsum("ij,ij->i", delta, delta)
    hit = dist2 < two_r_eff * two_r_eff
    if not np.any(hit):
        return 0.0, grad, np.zeros(n, dtype=np.int64)
    pi, pj, delta = pi[hit], pj[hit], delta[hit]
    dist = np.sqrt(dist2[hit])
    tiny = _TINY_REL * two_r_eff
    degenerate = dist < tiny
    if np.any(degenerate):
        # coincident centers: deterministic push along the first axis
        delta[degenerate] = 0.0
        delta[degenerate, 0] = tiny
        dist[degenerate] = tiny
    depth = two_r_eff - dist
    energy = 0.5 * float(np.sum(depth * depth))
    coeff = depth / dist
    force = coeff[:, None] * delta
    for k in range(dim):
        grad[:, k] -= np.bincount(pi, weights=force[:, k], minlength=n)
        grad[:, k] += np.bincount(pj, weights=force[:, k], minlength=n)
    mult = np.bincount(pi, minlength=n) + np.bincount(pj, minlength=n)
    return energy, grad, mult


def _axis_window(lo: float, hi: float, spacing: float, n: int, clip: bool):
    i0 = int(np.ceil(lo / spacing - 0.5))
    i1 = int(np.floor(hi / spacing - 0.5))
    if clip:
        i0 = max(i0, 0)
        i1 = min(i1, n - 1)
    return i0, i1


def _image_shifts(dim: int, edge: float, periodic: bool) -> np.ndarray:
    if not periodic:
        return np.zeros((1, dim))
    shifts = np.array([-edge, 0.0, edge])
    grids = np.meshgrid(*([shifts] * dim), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def voxelize_spheres(centers, radius, edge, n, periodic, out=None):
    """Midpoint rasterization of disks/spheres onto an n^d grid.

    Voxel centers sit at (i + 1/2) * edge/n; a voxel belongs to the
    inclusion phase iff its center lies inside some particle (surface ties
    count as inclusion).  Periodic cells rasterize every particle image
    intersecting the cell; non-periodic cells clip.
    """
    centers = np.asarray(centers, dtype=float)
    dim = centers.shape[1]
    h = edge / n
    if out is None:
        out = np.zeros((n,) * dim, dtype=np.uint8)
    shifts = _image_shifts(dim, edge, periodic)
    r2 = radius * radius
    for c in centers:
        for off in shifts:
            cc = c + off
            idx = []
            empty = False
            for k in range(dim):
                i0, i1 = _axis_window(cc[k] - radius, cc[k] + radius, h, n, clip=True)
                if i1 < i0:
                    empty = True
                    break
                idx.append(np.arange(i0, i1 + 1))
            if empty:
                continue
            coords = [(ix + 0.5) * h - cc[k] for k, ix in enumerate(idx)]
            if dim == 2:
                d2 = coords[0][:, None] ** 2 + coords[1][None, :] ** 2
                out[np.ix_(idx[0], idx[1])] |= (d2 <= r2).astype(np.uint8)
            else:
                d2 = (
                    coords[0][:, None, None] ** 2
                    + coords[1][None, :, None] ** 2
                    + coords[2][None, None, :] ** 2
                )
                out[np.ix_(idx[0], idx[1], idx[2])] |= (d2 <= r2).astype(np.uint8)
    return out


def voxelize_spherocylinders(centers, axes, half_length, radius, edge, n,
                             periodic, caps, out=None):
    """Midpoint rasterization of spherocylinders (caps=True) or bare
    cylinders (caps=False) onto an n^3 grid."""
    centers = np.asarray(centers, dtype=float)
    axes = np.asarray(axes, dtype=float)
    h = edge / n
    if out is None:
        out = np.zeros((n, n, n), dtype=np.uint8)
    shifts = _image_shifts(3, edge, periodic)
    r2 = radius * radius
    for c, a in zip(centers, axes):
        ext = half_length * np.abs(a) + radius
        for off in shifts:
            cc = c + off
            idx = []
            empty = False
            for k in range(3):
                i0, i1 = _axis_window(cc[k] - ext[k], cc[k] + ext[k], h, n, clip=True)
                if i1 < i0:
                    empty = True
                    break
                idx.append(np.arange(i0, i1 + 1))
            if empty:
                continue
            wx = (idx[0] + 0.5) * h - cc[0]
            wy = (idx[1] + 0.5) * h - cc[1]
            wz = (idx[2] + 0.5) * h - cc[2]
            t = (
                wx[:, None, None] * a[0]
                + wy[None, :, None] * a[1]
                + wz[None, None, :] * a[2]
            )
            w2 = (
                wx[:, None, None] ** 2
                + wy[None, :, None] ** 2
                + wz[None, None, :] ** 2
            )
            if caps:
                tc = np.clip(t, -half_length, half_length)
                inside = w2 - 2.0 * t * tc + tc * tc <= r2
            else:
                inside = (np.abs(t) <= half_length) & (w2 - t * t <= r2)
            out[np.ix_(idx[0], idx[1], idx[2])] |= inside.astype(np.uint8)
    return out
