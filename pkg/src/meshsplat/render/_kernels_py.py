"""NumPy fallback for the rasterization kernels.

Same traversal and per-pixel arithmetic as the compiled extension, vectorized
over the pixels of each tile so the fallback stays usable interactively.
Selected automatically when the extension is unavailable (or when
MESHSPLAT_PURE_PYTHON=1).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def rasterize_forward(width, height, binning, means2d, conics, colors,
                      opacities, trunc_radii, background, power_cutoff,
                      term_transmittance, alpha_max):
    """Front-to-back alpha compositing over depth-sorted tile lists.

    The truncation test is the power cutoff itself, so `trunc_radii` (used
    by the compiled kernel to narrow its pixel window) is not needed here.
    Returns (rgb, alpha, final_T, last_contrib, n_contrib); `last_contrib`
    holds, per pixel, the index into the tile's entry list of the last
    composited Gaussian (-1 if none), which the backward pass replays.
    """
    ts = binning.tile_size
    rgb = np.zeros((height, width, 3), dtype=np.float64)
    final_T = np.ones((height, width), dtype=np.float64)
    last_contrib = np.full((height, width), -1, dtype=np.int32)
    n_contrib = np.zeros((height, width), dtype=np.int32)

    for ty in range(binning.n_tiles_y):
        y0, y1 = ty * ts, min((ty + 1) * ts, height)
        for tx in range(binning.n_tiles_x):
            t = ty * binning.n_tiles_x + tx
            ent = binning.entries[binning.starts[t]:binning.starts[t + 1]]
            if len(ent) == 0:
                continue
            x0, x1 = tx * ts, min((tx + 1) * ts, width)
            ys, xs = np.mgrid[y0:y1, x0:x1]
            px = xs.astype(np.float64).ravel()
            py = ys.astype(np.float64).ravel()
            T = np.ones(px.shape, dtype=np.float64)
            C = np.zeros((len(px), 3), dtype=np.float64)
            last = np.full(px.shape, -1, dtype=np.int32)
            ncon = np.zeros(px.shape, dtype=np.int32)
            active = np.ones(px.shape, dtype=bool)
            for j, g in enumerate(ent):
                ca, cb, cc = conics[g]
                dx = px - means2d[g, 0]
                dy = py - means2d[g, 1]
                power = 0.5 * (ca * dx * dx + cc * dy * dy) + cb * dx * dy
                hit = active & (power <= power_cutoff)
                if not hit.any():
                    continue
                alpha = np.minimum(opacities[g] * np.exp(-power), alpha_max)
                C[hit] += colors[g] * (alpha[hit] * T[hit])[:, None]
                T[hit] = T[hit] * (1.0 - alpha[hit])
                last[hit] = j
                ncon[hit] += 1
                active[hit & (T < term_transmittance)] = False
            C += background[None, :] * T[:, None]
            shape = (y1 - y0, x1 - x0)
            rgb[y0:y1, x0:x1] = C.reshape(shape + (3,))
            final_T[y0:y1, x0:x1] = T.reshape(shape)
            last_contrib[y0:y1, x0:x1] = last.reshape(shape)
            n_contrib[y0:y1, x0:x1] = ncon.reshape(shape)

    # Tiles with no entries still composite the background.
    untouched = last_contrib == -1
    rgb[untouched] = background[None, :] * final_T[untouched][:, None]
    alpha = 1.0 - final_T
    return rgb, alpha, final_T, last_contrib, n_contrib


def rasterize_backward(width, height, binning, means2d, conics, colors,
                       opacities, trunc_radii, background, power_cutoff,
                       alpha_max, final_T, last_contrib, dL_drgb):
    """Adjoint of rasterize_forward for dL/d(mean2d, conic, color, opacity).

    Replays each pixel's composited prefix in reverse, reconstructing the
    running transmittance by division (alpha is clamped away from 1).
    """
    n = len(means2d)
    ts = binning.tile_size
    dmean2d = np.zeros((n, 2), dtype=np.float64)
    dconic = np.zeros((n, 3), dtype=np.float64)
    dcolor = np.zeros((n, 3), dtype=np.float64)
    dopacity = np.zeros(n, dtype=np.float64)

    for ty in range(binning.n_tiles_y):
        y0, y1 = ty * ts, min((ty + 1) * ts, height)
        for tx in range(binning.n_tiles_x):
            t = ty * binning.n_tiles_x + tx
            ent = binning.entries[binning.starts[t]:binning.starts[t + 1]]
            if len(ent) == 0:
                continue
            x0, x1 = tx * ts, min((tx + 1) * ts, width)
            ys, xs = np.mgrid[y0:y1, x0:x1]
            px = xs.astype(np.float64).ravel()
            py = ys.astype(np.float64).ravel()
            T_run = final_T[y0:y1, x0:x1].ravel().copy()
            last = last_contrib[y0:y1, x0:x1].ravel()
            dC = dL_drgb[y0:y1, x0:x1].reshape(-1, 3)
            S = background[None, :] * T_run[:, None]
            for j in range(len(ent) - 1, -1, -1):
                g = ent[j]
                scope = last >= j
                if not scope.any():
                    continue
                ca, cb, cc = conics[g]
                dx = px - means2d[g, 0]
                dy = py - means2d[g, 1]
                power = 0.5 * (ca * dx * dx + cc * dy * dy) + cb * dx * dy
                hit = scope & (power <= power_cutoff)
                if not hit.any():
                    continue
                gval = np.exp(-power[hit])
                alpha = opacities[g] * gval
                clamped = alpha > alpha_max
                alpha = np.minimum(alpha, alpha_max)
                one_m = 1.0 - alpha
                T_before = T_run[hit] / one_m
                dCh = dC[hit]
                dcolor[g] += (alpha * T_before) @ dCh
                dalpha = ((colors[g][None, :] * T_before[:, None] -
                           S[hit] / one_m[:, None]) * dCh).sum(axis=1)
                dalpha = np.where(clamped, 0.0, dalpha)
                dopacity[g] += float((gval * dalpha).sum())
                dpower = -alpha * dalpha
                hx, hy = dx[hit], dy[hit]
                dconic[g, 0] += float((0.5 * hx * hx * dpower).sum())
                dconic[g, 1] += float((hx * hy * dpower).sum())
                dconic[g, 2] += float((0.5 * hy * hy * dpower).sum())
                dmean2d[g, 0] += float((-(ca * hx + cb * hy) * dpower).sum())
                dmean2d[g, 1] += float((-(cb * hx + cc * hy) * dpower).sum())
                S[hit] += colors[g][None, :] * (alpha * T_before)[:, None]
                T_run[hit] = T_before
    return dmean2d, dconic, dcolor, dopacity
