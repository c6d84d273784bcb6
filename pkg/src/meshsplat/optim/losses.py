"""Training losses: L1 + D-SSIM photometric term and the splat-size
regularizer, with analytic gradients.

SSIM uses the 11x11 Gaussian window (sigma 1.5) applied per channel with
zero padding, the convention splatting trainers inherit.  The window is
symmetric and the padding linear, so the filter is its own adjoint and the
gradient stays a handful of filtered images.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

_SSIM_C1 = 0.01**2
_SSIM_C2 = 0.03**2
_WINDOW_RADIUS = 5
_WINDOW_SIGMA = 1.5


def _gauss_window():
    x = np.arange(-_WINDOW_RADIUS, _WINDOW_RADIUS + 1, dtype=np.float64)
    w = np.exp(-(x**2) / (2.0 * _WINDOW_SIGMA**2))
    return w / w.sum()

_WINDOW = _gauss_window()


def _filt(img: np.ndarray) -> np.ndarray:
    """Separable 11x11 Gaussian filter, zero padding, per channel."""
    out = correlate1d(img, _WINDOW, axis=0, mode="constant", cval=0.0)
    return correlate1d(out, _WINDOW, axis=1, mode="constant", cval=0.0)


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    return _ssim_forward(x, y)[0]


def _ssim_forward(x, y):
    mu_x = _filt(x)
    mu_y = _filt(y)
    sxx = _filt(x * x) - mu_x * mu_x
    syy = _filt(y * y) - mu_y * mu_y
    sxy = _filt(x * y) - mu_x * mu_y
    a1 = 2.0 * mu_x * mu_y + _SSIM_C1
    a2 = 2.0 * sxy + _SSIM_C2
    b1 = mu_x * mu_x + mu_y * mu_y + _SSIM_C1
    b2 = sxx + syy + _SSIM_C2
    smap = (a1 * a2) / (b1 * b2)
    return float(smap.mean()), (mu_x, mu_y, a1, a2, b1, b2, smap)


def _ssim_backward(x, y, saved, upstream=1.0):
    """d(mean SSIM)/dx given the forward intermediates."""
    mu_x, mu_y, a1, a2, b1, b2, smap = saved
    ds = np.full_like(smap, upstream / smap.size)
    denom = b1 * b2
    da1 = ds * a2 / denom
    da2 = ds * a1 / denom
    db1 = -ds * smap / b1
    db2 = -ds * smap / b2
    dmu_x = 2.0 * mu_y * da1 + 2.0 * mu_x * db1
    dsxx = db2
    dsxy = 2.0 * da2
    # sxx = filt(x^2) - mu_x^2 ; sxy = filt(x y) - mu_x mu_y
    dmu_x += -2.0 * mu_x * dsxx - mu_y * dsxy
    return _filt(dmu_x) + 2.0 * x * _filt(dsxx) + y * _filt(dsxy)


def l1(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.abs(x - y).mean())


def photometric_loss(rendered: np.ndarray, target: np.ndarray,
                     lambda_dssim: float = 0.2):
    """(1 - lambda) * L1 + lambda * (1 - SSIM); scalar only."""
    if rendered.shape != target.shape:
        raise ValueError(
            f"image shape mismatch: {rendered.shape} vs {target.shape}")
    value = (1.0 - lambda_dssim) * l1(rendered, target)
    if lambda_dssim != 0.0:
        value += lambda_dssim * (1.0 - ssim(rendered, target))
    return value


def photometric_loss_grad(rendered, target, lambda_dssim=0.2):
    """Loss value and dL/d(rendered)."""
    if rendered.shape != target.shape:
        raise ValueError(
            f"image shape mismatch: {rendered.shape} vs {target.shape}")
    diff = rendered - target
    value = (1.0 - lambda_dssim) * float(np.abs(diff).mean())
    grad = (1.0 - lambda_dssim) * np.sign(diff) / diff.size
    if lambda_dssim != 0.0:
        sval, saved = _ssim_forward(rendered, target)
        value += lambda_dssim * (1.0 - sval)
        grad -= lambda_dssim * _ssim_backward(rendered, target, saved)
    return value, grad


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    mse = float(((x - y) ** 2).mean())
    if mse == 0.0:
        return float("inf")
    return -10.0 * np.log10(mse)


def regularization_loss(cloud, mesh, gamma: float) -> float:
    """Hinge on splat size versus the bound face circumcircle:
    sum_g max(max(s_g) - gamma * R_g, 0)."""
    excess = _scale_excess(cloud, mesh, gamma)
    return float(np.maximum(excess, 0.0).sum())


def regularization_loss_grad(cloud, mesh, gamma: float):
    """Loss plus dL_r/d(log_scales); the hinge passes gradient only to the
    largest scale axis of each offending splat."""
    scales = cloud.scales
    radii = mesh.face_circumradii[cloud.faces]
    amax = scales.argmax(axis=1)
    smax = scales[np.arange(len(scales)), amax]
    excess = smax - gamma * radii
    offending = excess > 0.0
    value = float(excess[offending].sum())
    grad = np.zeros_like(cloud.log_scales)
    idx = np.flatnonzero(offending)
    grad[idx, amax[idx]] = smax[idx]          # d s / d log s = s
    return value, grad


def scale_violations(cloud, mesh, gamma: float) -> int:
    """Number of splats with max(s) > gamma * R (the regularizer's target)."""
    return int((_scale_excess(cloud, mesh, gamma) > 0.0).sum())


def _scale_excess(cloud, mesh, gamma):
    scales = cloud.scales
    radii = mesh.face_circumradii[cloud.faces]
    return scales.max(axis=1) - gamma * radii
