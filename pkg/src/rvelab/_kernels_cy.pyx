# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: pair overlap forces via cell-linked lists and
midpoint voxelization.  Mirrors ``_kernels_py`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, fabs, floor, round, sqrt

cnp.import_array()

DEF TINY_REL = 1e-14


def pair_energy_gradient(centers, double edge, double two_r_eff):
    cdef double[:, ::1] x = np.ascontiguousarray(centers, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef int dim = <int> x.shape[1]
    grad_arr = np.zeros((n, dim), dtype=np.float64)
    mult_arr = np.zeros(n, dtype=np.int64)
    if n < 2:
        return 0.0, grad_arr, mult_arr
    cdef double[:, ::1] grad = grad_arr
    cdef long[::1] mult = mult_arr

    cdef int nb = <int> (edge / two_r_eff)
    if nb < 3:
        nb = 1
    cdef int k, nbins_total = nb
    for k in range(dim - 1):
        nbins_total *= nb

    # counting sort into contiguous per-bin segments (CSR layout)
    flat_arr = np.zeros(n, dtype=np.int64)
    starts_arr = np.zeros(nbins_total + 1, dtype=np.int64)
    order_arr = np.zeros(n, dtype=np.int64)
    xs_arr = np.zeros((n, dim), dtype=np.float64)
    gs_arr = np.zeros((n, dim), dtype=np.float64)
    ms_arr = np.zeros(n, dtype=np.int64)
    cdef long[::1] flat = flat_arr
    cdef long[::1] starts = starts_arr
    cdef long[::1] order = order_arr
    cdef double[:, ::1] xs = xs_arr
    cdef double[:, ::1] gs = gs_arr
    cdef long[::1] ms = ms_arr

    cdef Py_ssize_t i, j, p, q
    cdef int b0, f
    cdef double inv = nb / edge
    for i in range(n):
        f = 0
        for k in range(dim):
            b0 = <int> floor(x[i, k] * inv)
            if b0 < 0:
                b0 = 0
            elif b0 >= nb:
                b0 = nb - 1
            f = f * nb + b0
        flat[i] = f
        starts[f + 1] += 1
    for f in range(nbins_total):
        starts[f + 1] += starts[f]
    cursor_arr = starts_arr[:-1].copy()
    cdef long[::1] cursor = cursor_arr
    for i in range(n):
        f = <int> flat[i]
        order[cursor[f]] = i
        cursor[f] += 1
    for p in range(n):
        i = order[p]
        for k in range(dim):
            xs[p, k] = x[i, k]

    # lexicographically positive neighbor offsets: each unordered bin pair once
    cdef int[4][2] off2 = [[0, 1], [1, -1], [1, 0], [1, 1]]
    cdef int[13][3] off3 = [
        [0, 0, 1], [0, 1, -1], [0, 1, 0], [0, 1, 1],
        [1, -1, -1], [1, -1, 0], [1, -1, 1], [1, 0, -1],
        [1, 0, 0], [1, 0, 1], [1, 1, -1], [1, 1, 0], [1, 1, 1],
    ]
    cdef int noff = 4 if dim == 2 else 13

    cdef double w = 0.0
    cdef double half_edge = 0.5 * edge
    cdef double t2 = two_r_eff * two_r_eff
    cdef double tiny = TINY_REL * two_r_eff
    cdef double d2, dist, depth, coeff
    cdef double[3] delta
    cdef int c0, c1, c2, g0, g1, g2, o
    cdef long bflat, nbflat, pa, pb, qa, qb

    if nb == 1:
        for p in range(n):
            for q in range(p + 1, n):
                d2 = 0.0
                for k in range(dim):
                    delta[k] = xs[p, k] - xs[q, k]
                    if delta[k] > half_edge:
                        delta[k] -= edge
                    elif delta[k] < -half_edge:
                        delta[k] += edge
                    d2 += delta[k] * delta[k]
                if d2 < t2:
                    dist = sqrt(d2)
                    if dist < tiny:
                        delta[0] = tiny
                        for k in range(1, dim):
                            delta[k] = 0.0
                        dist = tiny
                    depth = two_r_eff - dist
                    w += 0.5 * depth * depth
                    coeff = depth / dist
                    for k in range(dim):
                        gs[p, k] -= coeff * delta[k]
                        gs[q, k] += coeff * delta[k]
                    ms[p] += 1
                    ms[q] += 1
    elif dim == 2:
        for c0 in range(nb):
            for c1 in range(nb):
                bflat = c0 * nb + c1
                pa = starts[bflat]
                pb = starts[bflat + 1]
                if pa == pb:
                    continue
                # intra-bin pairs
                for p in range(pa, pb):
                    for q in range(p + 1, pb):
                        d2 = 0.0
                        for k in range(2):
                            delta[k] = xs[p, k] - xs[q, k]
                            if delta[k] > half_edge:
                                delta[k] -= edge
                            elif delta[k] < -half_edge:
                                delta[k] += edge
                            d2 += delta[k] * delta[k]
                        if d2 < t2:
                            dist = sqrt(d2)
                            if dist < tiny:
                                delta[0] = tiny
                                delta[1] = 0.0
                                dist = tiny
                            depth = two_r_eff - dist
                            w += 0.5 * depth * depth
                            coeff = depth / dist
                            for k in range(2):
                                gs[p, k] -= coeff * delta[k]
                                gs[q, k] += coeff * delta[k]
                            ms[p] += 1
                            ms[q] += 1
                for o in range(4):
                    g0 = c0 + off2[o][0]
                    if g0 >= nb:
                        g0 -= nb
                    g1 = c1 + off2[o][1]
                    if g1 >= nb:
                        g1 -= nb
                    elif g1 < 0:
                        g1 += nb
                    nbflat = g0 * nb + g1
                    qa = starts[nbflat]
                    qb = starts[nbflat + 1]
                    for p in range(pa, pb):
                        for q in range(qa, qb):
                            d2 = 0.0
                            for k in range(2):
                                delta[k] = xs[p, k] - xs[q, k]
                                if delta[k] > half_edge:
                                    delta[k] -= edge
                                elif delta[k] < -half_edge:
                                    delta[k] += edge
                                d2 += delta[k] * delta[k]
                            if d2 < t2:
                                dist = sqrt(d2)
                                if dist < tiny:
                                    delta[0] = tiny
                                    delta[1] = 0.0
                                    dist = tiny
                                depth = two_r_eff - dist
                                w += 0.5 * depth * depth
                                coeff = depth / dist
                                for k in range(2):
                                    gs[p, k] -= coeff * delta[k]
                                    gs[q, k] += coeff * delta[k]
                                ms[p] += 1
                                ms[q] += 1
    else:
        for c0 in range(nb):
            for c1 in range(nb):
                for c2 in range(nb):
                    bflat = (c0 * nb + c1) * nb + c2
                    pa = starts[bflat]
                    pb = starts[bflat + 1]
                    if pa == pb:
                        continue
                    for p in range(pa, pb):
                        for q in range(p + 1, pb):
                            d2 = 0.0
                            for k in range(3):
                                delta[k] = xs[p, k] - xs[q, k]
                                if delta[k] > half_edge:
                                    delta[k] -= edge
                                elif delta[k] < -half_edge:
                                    delta[k] += edge
                                d2 += delta[k] * delta[k]
                            if d2 < t2:
                                dist = sqrt(d2)
                                if dist < tiny:
                                    delta[0] = tiny
                                    delta[1] = 0.0
                                    delta[2] = 0.0
                                    dist = tiny
                                depth = two_r_eff - dist
                                w += 0.5 * depth * depth
                                coeff = depth / dist
                                for k in range(3):
                                    gs[p, k] -= coeff * delta[k]
                                    gs[q, k] += coeff * delta[k]
                                ms[p] += 1
                                ms[q] += 1
                    for o in range(13):
                        g0 = c0 + off3[o][0]
                        if g0 >= nb:
                            g0 -= nb
                        g1 = c1 + off3[o][1]
                        if g1 >= nb:
                            g1 -= nb
                        elif g1 < 0:
                            g1 += nb
                        g2 = c2 + off3[o][2]
                        if g2 >= nb:
                            g2 -= nb
                        elif g2 < 0:
                            g2 += nb
                        nbflat = (g0 * nb + g1) * nb + g2
                        qa = starts[nbflat]
                        qb = starts[nbflat + 1]
                        for p in range(pa, pb):
                            for q in range(qa, qb):
                                d2 = 0.0
                                for k in range(3):
                                    delta[k] = xs[p, k] - xs[q, k]
                                    if delta[k] > half_edge:
                                        delta[k] -= edge
                                    elif delta[k] < -half_edge:
                                        delta[k] += edge
                                    d2 += delta[k] * delta[k]
                                if d2 < t2:
                                    dist = sqrt(d2)
                                    if dist < tiny:
                                        delta[0] = tiny
                                        delta[1] = 0.0
                                        delta[2] = 0.0
                                        dist = tiny
                                    depth = two_r_eff - dist
                                    w += 0.5 * depth * depth
                                    coeff = depth / dist
                                    for k in range(3):
                                        gs[p, k] -= coeff * delta[k]
                                        gs[q, k] += coeff * delta[k]
                                    ms[p] += 1
                                    ms[q] += 1

    # scatter sorted-order results back to input order
    for p in range(n):
        i = order[p]
        for k in range(dim):
            grad[i, k] = gs[p, k]
        mult[i] = ms[p]
    return w, grad_arr, mult_arr


cdef inline int _win_lo(double lo, double h) noexcept nogil:
    return <int> ceil(lo / h - 0.5)


cdef inline int _win_hi(double hi, double h) noexcept nogil:
    return <int> floor(hi / h - 0.5)


def voxelize_spheres(centers, double radius, double edge, int n,
                     bint periodic, out=None):
    cdef double[:, ::1] x = np.ascontiguousarray(centers, dtype=np.float64)
    cdef Py_ssize_t npart = x.shape[0]
    cdef int dim = <int> x.shape[1]
    if out is None:
        out = np.zeros((n,) * dim, dtype=np.uint8)
    cdef unsigned char[::1] flat = out.ravel()
    cdef double h = edge / n
    cdef double r2 = radius * radius
    cdef double shift0, shift1, shift2, cx, cy, cz, dx, dy, dz, dxy2
    cdef int s0, s1, s2, i0, i1, j0, j1, k0, k1, ix, iy, iz
    cdef int nshift = 3 if periodic else 1
    cdef double[3] shifts
    shifts[0] = 0.0
    shifts[1] = -edge
    shifts[2] = edge
    cdef Py_ssize_t p
    if dim == 2:
        for p in range(npart):
            for s0 in range(nshift):
                cx = x[p, 0] + shifts[s0]
                i0 = _win_lo(cx - radius, h)
                i1 = _win_hi(cx + radius, h)
                if i0 < 0:
                    i0 = 0
                if i1 > n - 1:
                    i1 = n - 1
                if i1 < i0:
                    continue
                for s1 in range(nshift):
                    cy = x[p, 1] + shifts[s1]
                    j0 = _win_lo(cy - radius, h)
                    j1 = _win_hi(cy + radius, h)
                    if j0 < 0:
                        j0 = 0
                    if j1 > n - 1:
                        j1 = n - 1
                    if j1 < j0:
                        continue
                    for ix in range(i0, i1 + 1):
                        dx = (ix + 0.5) * h - cx
                        dxy2 = dx * dx
                        for iy in range(j0, j1 + 1):
                            dy = (iy + 0.5) * h - cy
                            if dxy2 + dy * dy <= r2:
                                flat[ix * n + iy] = 1
    else:
        for p in range(npart):
            for s0 in range(nshift):
                cx = x[p, 0] + shifts[s0]
                i0 = _win_lo(cx - radius, h)
                i1 = _win_hi(cx + radius, h)
                if i0 < 0:
                    i0 = 0
                if i1 > n - 1:
                    i1 = n - 1
                if i1 < i0:
                    continue
                for s1 in range(nshift):
                    cy = x[p, 1] + shifts[s1]
                    j0 = _win_lo(cy - radius, h)
                    j1 = _win_hi(cy + radius, h)
                    if j0 < 0:
                        j0 = 0
                    if j1 > n - 1:
                        j1 = n - 1
                    if j1 < j0:
                        continue
                    for s2 in range(nshift):
                        cz = x[p, 2] + shifts[s2]
                        k0 = _win_lo(cz - radius, h)
                        k1 = _win_hi(cz + radius, h)
                        if k0 < 0:
                            k0 = 0
                        if k1 > n - 1:
                            k1 = n - 1
                        if k1 < k0:
                            continue
                        for ix in range(i0, i1 + 1):
                            dx = (ix + 0.5) * h - cx
                            for iy in range(j0, j1 + 1):
                                dy = (iy + 0.5) * h - cy
                                dxy2 = dx * dx + dy * dy
                                if dxy2 > r2:
                                    continue
                                for iz in range(k0, k1 + 1):
                                    dz = (iz + 0.5) * h - cz
                                    if dxy2 + dz * dz <= r2:
                                        flat[(ix * n + iy) * n + iz] = 1
    return out


def voxelize_spherocylinders(centers, axes, double half_length, double radius,
                             double edge, int n, bint periodic, bint caps,
                             out=None):
    cdef double[:, ::1] x = np.ascontiguousarray(centers, dtype=np.float64)
    cdef double[:, ::1] a = np.ascontiguousarray(axes, dtype=np.float64)
    cdef Py_ssize_t npart = x.shape[0]
    if out is None:
        out = np.zeros((n, n, n), dtype=np.uint8)
    cdef unsigned char[::1] flat = out.ravel()
    cdef double h = edge / n
    cdef double r2 = radius * radius
    cdef double cx, cy, cz, ax_, ay_, az_, ex, ey, ez
    cdef double wx, wy, wz, t, w2, tc
    cdef int s0, s1, s2, i0, i1, j0, j1, k0, k1, ix, iy, iz
    cdef int nshift = 3 if periodic else 1
    cdef double[3] shifts
    shifts[0] = 0.0
    shifts[1] = -edge
    shifts[2] = edge
    cdef Py_ssize_t p
    for p in range(npart):
        ax_ = a[p, 0]
        ay_ = a[p, 1]
        az_ = a[p, 2]
        ex = half_length * fabs(ax_) + radius
        ey = half_length * fabs(ay_) + radius
        ez = half_length * fabs(az_) + radius
        for s0 in range(nshift):
            cx = x[p, 0] + shifts[s0]
            i0 = _win_lo(cx - ex, h)
            i1 = _win_hi(cx + ex, h)
            if i0 < 0:
                i0 = 0
            if i1 > n - 1:
                i1 = n - 1
            if i1 < i0:
                continue
            for s1 in range(nshift):
                cy = x[p, 1] + shifts[s1]
                j0 = _win_lo(cy - ey, h)
                j1 = _win_hi(cy + ey, h)
                if j0 < 0:
                    j0 = 0
                if j1 > n - 1:
                    j1 = n - 1
                if j1 < j0:
                    continue
                for s2 in range(nshift):
                    cz = x[p, 2] + shifts[s2]
                    k0 = _win_lo(cz - ez, h)
                    k1 = _win_hi(cz + ez, h)
                    if k0 < 0:
                        k0 = 0
                    if k1 > n - 1:
                        k1 = n - 1
                    if k1 < k0:
                        continue
                    for ix in range(i0, i1 + 1):
                        wx = (ix + 0.5) * h - cx
                        for iy in range(j0, j1 + 1):
                            wy = (iy + 0.5) * h - cy
                            for iz in range(k0, k1 + 1):
                                wz = (iz + 0.5) * h - cz
                                t = wx * ax_ + wy * ay_ + wz * az_
                                w2 = wx * wx + wy * wy + wz * wz
                                if caps:
                                    tc = t
                                    if tc < -half_length:
                                        tc = -half_length
                                    elif tc > half_length:
                                        tc = half_length
                                    if w2 - 2.0 * t * tc + tc * tc <= r2:
                                        flat[(ix * n + iy) * n + iz] = 1
                                else:
                                    if fabs(t) <= half_length and w2 - t * t <= r2:
                                        flat[(ix * n + iy) * n + iz] = 1
    return out
