"""Brute-force reference compositor: every pixel against every Gaussian,
no tiling.  This is the renderer's correctness oracle; it replicates the
per-pixel arithmetic of the tiled kernels (same truncation, same clamp, same
termination rule) so small scenes agree bitwise with the NumPy tile path.
"""

from __future__ import annotations

import numpy as np


def composite_bruteforce(width, height, order, means2d, conics, colors,
                         opacities, background, power_cutoff,
                         term_transmittance, alpha_max):
    """O(pixels x gaussians) forward compositing.

    `order` is the global front-to-back index order of the (valid) Gaussians.
    Returns (rgb, alpha).
    """
    ys, xs = np.mgrid[0:height, 0:width]
    px = xs.astype(np.float64).ravel()
    py = ys.astype(np.float64).ravel()
    npx = len(px)
    if len(order) == 0:
        rgb = np.broadcast_to(background, (height, width, 3)).copy()
        return rgb, np.zeros((height, width))

    mx = means2d[order, 0][None, :]
    my = means2d[order, 1][None, :]
    ca = conics[order, 0][None, :]
    cb = conics[order, 1][None, :]
    cc = conics[order, 2][None, :]
    dx = px[:, None] - mx
    dy = py[:, None] - my
    power = 0.5 * (ca * dx * dx + cc * dy * dy) + cb * dx * dy
    alpha = np.minimum(opacities[order][None, :] * np.exp(-power), alpha_max)
    alpha = np.where(power <= power_cutoff, alpha, 0.0)

    T_after = np.cumprod(1.0 - alpha, axis=1)
    T_before = np.concatenate([np.ones((npx, 1)), T_after[:, :-1]], axis=1)
    include = T_before >= term_transmittance

    weights = np.where(include, alpha * T_before, 0.0)
    rgb = np.cumsum(weights[:, :, None] * colors[order][None, :, :], axis=1)[:, -1, :]
    T_final = np.where(include, T_after, np.inf).min(axis=1)
    T_final = np.where(np.isfinite(T_final), T_final, 1.0)
    rgb = rgb + background[None, :] * T_final[:, None]
    return (rgb.reshape(height, width, 3),
            (1.0 - T_final).reshape(height, width))
