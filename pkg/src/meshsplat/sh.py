"""Real spherical-harmonics color evaluation (degrees 0..3) and its
derivatives, following the splatting convention: a +0.5 DC offset and a
[0, 1] clamp per channel."""

from __future__ import annotations

import numpy as np

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)


def n_coeffs(degree: int) -> int:
    return (degree + 1) ** 2


def sh_basis(degree: int, dirs: np.ndarray) -> np.ndarray:
    """Basis values Y_lm for unit directions.

    Parameters
    ----------
    degree : 0..3
    dirs : (..., 3) unit vectors

    Returns
    -------
    (..., (degree+1)**2) basis array
    """
    if not 0 <= degree <= 3:
        raise ValueError(f"unsupported SH degree {degree}")
    dirs = np.asarray(dirs, dtype=np.float64)
    out = np.empty(dirs.shape[:-1] + (n_coeffs(degree),), dtype=np.float64)
    out[..., 0] = C0
    if degree >= 1:
        x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
        out[..., 1] = -C1 * y
        out[..., 2] = C1 * z
        out[..., 3] = -C1 * x
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        out[..., 4] = C2[0] * xy
        out[..., 5] = C2[1] * yz
        out[..., 6] = C2[2] * (2.0 * zz - xx - yy)
        out[..., 7] = C2[3] * xz
        out[..., 8] = C2[4] * (xx - yy)
    if degree >= 3:
        out[..., 9] = C3[0] * y * (3.0 * xx - yy)
        out[..., 10] = C3[1] * xy * z
        out[..., 11] = C3[2] * y * (4.0 * zz - xx - yy)
        out[..., 12] = C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
        out[..., 13] = C3[4] * x * (4.0 * zz - xx - yy)
        out[..., 14] = C3[5] * z * (xx - yy)
        out[..., 15] = C3[6] * x * (xx - 3.0 * yy)
    return out


def sh_basis_grad(degree: int, dirs: np.ndarray) -> np.ndarray:
    """dY_lm/d(dir) for unit directions: (..., (degree+1)**2, 3)."""
    if not 0 <= degree <= 3:
        raise ValueError(f"unsupported SH degree {degree}")
    dirs = np.asarray(dirs, dtype=np.float64)
    k = n_coeffs(degree)
    g = np.zeros(dirs.shape[:-1] + (k, 3), dtype=np.float64)
    if degree >= 1:
        x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
        g[..., 1, 1] = -C1
        g[..., 2, 2] = C1
        g[..., 3, 0] = -C1
    if degree >= 2:
        g[..., 4, 0] = C2[0] * y
        g[..., 4, 1] = C2[0] * x
        g[..., 5, 1] = C2[1] * z
        g[..., 5, 2] = C2[1] * y
        g[..., 6, 0] = C2[2] * (-2.0 * x)
        g[..., 6, 1] = C2[2] * (-2.0 * y)
        g[..., 6, 2] = C2[2] * (4.0 * z)
        g[..., 7, 0] = C2[3] * z
        g[..., 7, 2] = C2[3] * x
        g[..., 8, 0] = C2[4] * (2.0 * x)
        g[..., 8, 1] = C2[4] * (-2.0 * y)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        g[..., 9, 0] = C3[0] * 6.0 * x * y
        g[..., 9, 1] = C3[0] * (3.0 * xx - 3.0 * yy)
        g[..., 10, 0] = C3[1] * y * z
        g[..., 10, 1] = C3[1] * x * z
        g[..., 10, 2] = C3[1] * x * y
        g[..., 11, 0] = C3[2] * (-2.0 * x * y)
        g[..., 11, 1] = C3[2] * (4.0 * zz - xx - 3.0 * yy)
        g[..., 11, 2] = C3[2] * (8.0 * y * z)
        g[..., 12, 0] = C3[3] * (-6.0 * x * z)
        g[..., 12, 1] = C3[3] * (-6.0 * y * z)
        g[..., 12, 2] = C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)
        g[..., 13, 0] = C3[4] * (4.0 * zz - 3.0 * xx - yy)
        g[..., 13, 1] = C3[4] * (-2.0 * x * y)
        g[..., 13, 2] = C3[4] * (8.0 * x * z)
        g[..., 14, 0] = C3[5] * (2.0 * x * z)
        g[..., 14, 1] = C3[5] * (-2.0 * y * z)
        g[..., 14, 2] = C3[5] * (xx - yy)
        g[..., 15, 0] = C3[6] * (3.0 * xx - 3.0 * yy)
        g[..., 15, 1] = C3[6] * (-6.0 * x * y)
    return g


def eval_sh(sh: np.ndarray, dirs: np.ndarray, degree: int | None = None) -> np.ndarray:
    """RGB color for SH coefficients and unit view directions.

    color = sum_lm Y_lm(d) * c_lm + 0.5, clamped to [0, 1].

    Parameters
    ----------
    sh : (..., k, 3) coefficients, k >= (degree+1)**2
    dirs : (..., 3) unit directions (broadcast against sh)
    degree : evaluate only bands 0..degree (default: all of `sh`)
    """
    sh = np.asarray(sh, dtype=np.float64)
    if degree is None:
        degree = int(np.sqrt(sh.shape[-2])) - 1
    k = n_coeffs(degree)
    basis = sh_basis(degree, dirs)
    raw = np.einsum("...k,...kc->...c", basis, sh[..., :k, :]) + 0.5
    return np.clip(raw, 0.0, 1.0)


def eval_sh_with_grad(sh, dirs, degree=None):
    """eval_sh plus what the backward pass needs.

    Returns (color, basis, unclamped_mask) where `basis` is (..., k) and
    `unclamped_mask` marks channels strictly inside (0, 1) that pass
    gradient."""
    sh = np.asarray(sh, dtype=np.float64)
    if degree is None:
        degree = int(np.sqrt(sh.shape[-2])) - 1
    k = n_coeffs(degree)
    basis = sh_basis(degree, dirs)
    raw = np.einsum("...k,...kc->...c", basis, sh[..., :k, :]) + 0.5
    color = np.clip(raw, 0.0, 1.0)
    mask = (raw > 0.0) & (raw < 1.0)
    return color, basis, mask
