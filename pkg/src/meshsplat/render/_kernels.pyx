# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled rasterization kernels.

Entry-major traversal: per tile, splats are visited front to back and each
updates only the pixels inside its truncation-ellipse AABB (clipped to the
tile).  Per-pixel transmittance states make this order-equivalent to a
per-pixel front-to-back loop, so results match the brute-force reference.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, exp, floor

cnp.import_array()

BACKEND = "cython"

DEF TILE_CAP = 1024  # pixels per tile buffer (tile_size <= 32)


def rasterize_forward(int width, int height, binning,
                      double[:, ::1] means2d, double[:, ::1] conics,
                      double[:, ::1] colors, double[::1] opacities,
                      double[:, ::1] trunc_radii, double[::1] background,
                      double power_cutoff, double term_transmittance,
                      double alpha_max):
    cdef int ts = binning.tile_size
    cdef int ntx = binning.n_tiles_x
    cdef int nty = binning.n_tiles_y
    cdef long[::1] starts = np.ascontiguousarray(binning.starts, dtype=np.int64)
    cdef int[::1] entries = np.ascontiguousarray(binning.entries, dtype=np.int32)

    rgb_arr = np.zeros((height, width, 3), dtype=np.float64)
    final_T_arr = np.ones((height, width), dtype=np.float64)
    last_arr = np.full((height, width), -1, dtype=np.int32)
    ncon_arr = np.zeros((height, width), dtype=np.int32)
    cdef double[:, :, ::1] rgb = rgb_arr
    cdef double[:, ::1] final_T = final_T_arr
    cdef int[:, ::1] last = last_arr
    cdef int[:, ::1] ncon = ncon_arr

    cdef double[TILE_CAP] T
    cdef double[TILE_CAP] c0
    cdef double[TILE_CAP] c1
    cdef double[TILE_CAP] c2
    cdef int[TILE_CAP] lastbuf
    cdef int[TILE_CAP] nconbuf

    cdef int tx, ty, x, y, x0, x1, y0, y1, j, g, tw, th_, p
    cdef int ex0, ex1, ey0, ey1
    cdef long t, e0, e1
    cdef double ca, cb, cc, mx, my, rx, ry, dx, dy, power, alpha, Tp
    cdef double col0, col1, col2, opac

    if ts > 32:
        raise ValueError("tile size exceeds kernel buffer capacity")

    with nogil:
        for ty in range(nty):
            y0 = ty * ts
            y1 = min((ty + 1) * ts, height)
            th_ = y1 - y0
            for tx in range(ntx):
                t = ty * ntx + tx
                e0 = starts[t]
                e1 = starts[t + 1]
                x0 = tx * ts
                x1 = min((tx + 1) * ts, width)
                tw = x1 - x0
                for p in range(tw * th_):
                    T[p] = 1.0
                    c0[p] = 0.0
                    c1[p] = 0.0
                    c2[p] = 0.0
                    lastbuf[p] = -1
                    nconbuf[p] = 0
                for j in range(e1 - e0):
                    g = entries[e0 + j]
                    mx = means2d[g, 0]
                    my = means2d[g, 1]
                    rx = trunc_radii[g, 0]
                    ry = trunc_radii[g, 1]
                    # one-pixel slack absorbs rounding at the AABB boundary
                    ex0 = <int>ceil(mx - rx) - 1
                    ex1 = <int>floor(mx + rx) + 1
                    ey0 = <int>ceil(my - ry) - 1
                    ey1 = <int>floor(my + ry) + 1
                    if ex0 < x0: ex0 = x0
                    if ex1 >= x1: ex1 = x1 - 1
                    if ey0 < y0: ey0 = y0
                    if ey1 >= y1: ey1 = y1 - 1
                    if ex0 > ex1 or ey0 > ey1:
                        continue
                    ca = conics[g, 0]
                    cb = conics[g, 1]
                    cc = conics[g, 2]
                    col0 = colors[g, 0]
                    col1 = colors[g, 1]
                    col2 = colors[g, 2]
                    opac = opacities[g]
                    for y in range(ey0, ey1 + 1):
                        dy = y - my
                        for x in range(ex0, ex1 + 1):
                            p = (y - y0) * tw + (x - x0)
                            Tp = T[p]
                            if Tp < term_transmittance:
                                continue
                            dx = x - mx
                            power = 0.5 * (ca * dx * dx + cc * dy * dy) \
                                + cb * dx * dy
                            if power > power_cutoff:
                                continue
                            alpha = opac * exp(-power)
                            if alpha > alpha_max:
                                alpha = alpha_max
                            c0[p] = c0[p] + col0 * (alpha * Tp)
                            c1[p] = c1[p] + col1 * (alpha * Tp)
                            c2[p] = c2[p] + col2 * (alpha * Tp)
                            T[p] = Tp * (1.0 - alpha)
                            lastbuf[p] = j
                            nconbuf[p] = nconbuf[p] + 1
                for y in range(y0, y1):
                    for x in range(x0, x1):
                        p = (y - y0) * tw + (x - x0)
                        Tp = T[p]
                        rgb[y, x, 0] = c0[p] + background[0] * Tp
                        rgb[y, x, 1] = c1[p] + background[1] * Tp
                        rgb[y, x, 2] = c2[p] + background[2] * Tp
                        final_T[y, x] = Tp
                        last[y, x] = lastbuf[p]
                        ncon[y, x] = nconbuf[p]

    alpha_arr = 1.0 - final_T_arr
    return rgb_arr, alpha_arr, final_T_arr, last_arr, ncon_arr


def rasterize_backward(int width, int height, binning,
                       double[:, ::1] means2d, double[:, ::1] conics,
                       double[:, ::1] colors, double[::1] opacities,
                       double[:, ::1] trunc_radii, double[::1] background,
                       double power_cutoff, double alpha_max,
                       double[:, ::1] final_T, int[:, ::1] last_contrib,
                       double[:, :, ::1] dL_drgb):
    cdef int ts = binning.tile_size
    cdef int ntx = binning.n_tiles_x
    cdef int nty = binning.n_tiles_y
    cdef long[::1] starts = np.ascontiguousarray(binning.starts, dtype=np.int64)
    cdef int[::1] entries = np.ascontiguousarray(binning.entries, dtype=np.int32)
    cdef int n = means2d.shape[0]

    dmean2d_arr = np.zeros((n, 2), dtype=np.float64)
    dconic_arr = np.zeros((n, 3), dtype=np.float64)
    dcolor_arr = np.zeros((n, 3), dtype=np.float64)
    dopacity_arr = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] dmean2d = dmean2d_arr
    cdef double[:, ::1] dconic = dconic_arr
    cdef double[:, ::1] dcolor = dcolor_arr
    cdef double[::1] dopacity = dopacity_arr

    cdef double[TILE_CAP] T_run
    cdef double[TILE_CAP] s0
    cdef double[TILE_CAP] s1
    cdef double[TILE_CAP] s2

    cdef int tx, ty, x, y, x0, x1, y0, y1, j, g, tw, th_, p
    cdef int ex0, ex1, ey0, ey1
    cdef long t, e0, e1
    cdef double ca, cb, cc, mx, my, rx, ry, dx, dy, power, gval, alpha
    cdef double one_m, T_before, aT, dalpha, dpower, Tp
    cdef double col0, col1, col2, opac, d0, d1, d2
    cdef bint clamped

    if ts > 32:
        raise ValueError("tile size exceeds kernel buffer capacity")

    with nogil:
        for ty in range(nty):
            y0 = ty * ts
            y1 = min((ty + 1) * ts, height)
            th_ = y1 - y0
            for tx in range(ntx):
                t = ty * ntx + tx
                e0 = starts[t]
                e1 = starts[t + 1]
                if e0 == e1:
                    continue
                x0 = tx * ts
                x1 = min((tx + 1) * ts, width)
                tw = x1 - x0
                for y in range(y0, y1):
                    for x in range(x0, x1):
                        p = (y - y0) * tw + (x - x0)
                        Tp = final_T[y, x]
                        T_run[p] = Tp
                        s0[p] = background[0] * Tp
                        s1[p] = background[1] * Tp
                        s2[p] = background[2] * Tp
                for j in range(e1 - e0 - 1, -1, -1):
                    g = entries[e0 + j]
                    mx = means2d[g, 0]
                    my = means2d[g, 1]
                    rx = trunc_radii[g, 0]
                    ry = trunc_radii[g, 1]
                    ex0 = <int>ceil(mx - rx) - 1
                    ex1 = <int>floor(mx + rx) + 1
                    ey0 = <int>ceil(my - ry) - 1
                    ey1 = <int>floor(my + ry) + 1
                    if ex0 < x0: ex0 = x0
                    if ex1 >= x1: ex1 = x1 - 1
                    if ey0 < y0: ey0 = y0
                    if ey1 >= y1: ey1 = y1 - 1
                    if ex0 > ex1 or ey0 > ey1:
                        continue
                    ca = conics[g, 0]
                    cb = conics[g, 1]
                    cc = conics[g, 2]
                    col0 = colors[g, 0]
                    col1 = colors[g, 1]
                    col2 = colors[g, 2]
                    opac = opacities[g]
                    for y in range(ey0, ey1 + 1):
                        dy = y - my
                        for x in range(ex0, ex1 + 1):
                            if last_contrib[y, x] < j:
                                continue
                            dx = x - mx
                            power = 0.5 * (ca * dx * dx + cc * dy * dy) \
                                + cb * dx * dy
                            if power > power_cutoff:
                                continue
                            p = (y - y0) * tw + (x - x0)
                            gval = exp(-power)
                            alpha = opac * gval
                            clamped = alpha > alpha_max
                            if clamped:
                                alpha = alpha_max
                            one_m = 1.0 - alpha
                            T_before = T_run[p] / one_m
                            aT = alpha * T_before
                            d0 = dL_drgb[y, x, 0]
                            d1 = dL_drgb[y, x, 1]
                            d2 = dL_drgb[y, x, 2]
                            dcolor[g, 0] += aT * d0
                            dcolor[g, 1] += aT * d1
                            dcolor[g, 2] += aT * d2
                            dalpha = ((col0 * T_before - s0[p] / one_m) * d0 +
                                      (col1 * T_before - s1[p] / one_m) * d1 +
                                      (col2 * T_before - s2[p] / one_m) * d2)
                            if clamped:
                                dalpha = 0.0
                            dopacity[g] += gval * dalpha
                            dpower = -alpha * dalpha
                            dconic[g, 0] += 0.5 * dx * dx * dpower
                            dconic[g, 1] += dx * dy * dpower
                            dconic[g, 2] += 0.5 * dy * dy * dpower
                            dmean2d[g, 0] += -(ca * dx + cb * dy) * dpower
                            dmean2d[g, 1] += -(cb * dx + cc * dy) * dpower
                            s0[p] = s0[p] + col0 * aT
                            s1[p] = s1[p] + col1 * aT
                            s2[p] = s2[p] + col2 * aT
                            T_run[p] = T_before

    return dmean2d_arr, dconic_arr, dcolor_arr, dopacity_arr
