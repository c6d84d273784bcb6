"""Perspective projection of 3D Gaussians to screen-space 2D Gaussians via
the local affine approximation of the pinhole map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..camera import Camera


@dataclass
class ProjectedGaussian:
    """One splat on the image plane (spec-level record)."""

    mean2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    color: np.ndarray
    effective_opacity_base: float


def perspective_jacobians(t: np.ndarray, fx: float, fy: float) -> np.ndarray:
    """(N, 2, 3) Jacobians of the pinhole map at camera-space points t."""
    tx, ty, tz = t[:, 0], t[:, 1], t[:, 2]
    J = np.zeros((len(t), 2, 3), dtype=np.float64)
    J[:, 0, 0] = fx / tz
    J[:, 0, 2] = -fx * tx / tz**2
    J[:, 1, 1] = fy / tz
    J[:, 1, 2] = -fy * ty / tz**2
    return J


def project_arrays(means3d, cov3d, camera: Camera, near=0.01, dilation=0.3,
                   cond_max=1e12):
    """Project all Gaussians; returns a dict of arrays plus a validity mask.

    Invalid (culled) entries are those behind the near plane or whose dilated
    2D covariance is numerically degenerate.  Array entries for culled
    Gaussians are unspecified.

    Keys: valid, t (camera-space points), depths, means2d, cov2d, conics,
    radii (truncation-free per-axis sigma), J, M.
    """
    means3d = np.asarray(means3d, dtype=np.float64)
    n = len(means3d)
    t = means3d @ camera.rotation.T + camera.translation
    depths = t[:, 2].copy()
    valid = depths > near
    # Keep the math well-defined for culled rows.
    tz_safe = np.where(valid, depths, 1.0)
    tsafe = t.copy()
    tsafe[:, 2] = tz_safe

    J = perspective_jacobians(tsafe, camera.fx, camera.fy)
    M = J @ camera.rotation                                     # (N, 2, 3)
    cov2d = M @ cov3d @ np.swapaxes(M, 1, 2)
    cov2d[:, 0, 0] += dilation
    cov2d[:, 1, 1] += dilation

    a = cov2d[:, 0, 0]
    b = cov2d[:, 0, 1]
    c = cov2d[:, 1, 1]
    det = a * c - b * b
    # Eigenvalues of the symmetric 2x2 give the condition number.
    mid = 0.5 * (a + c)
    rad = np.sqrt(np.maximum(mid * mid - det, 0.0))
    lam_min = mid - rad
    lam_max = mid + rad
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(lam_min > 0, lam_max / np.maximum(lam_min, 1e-300), np.inf)
    valid &= (det > 0) & (cond < cond_max)

    det_safe = np.where(det > 0, det, 1.0)
    conics = np.stack([c / det_safe, -b / det_safe, a / det_safe], axis=1)

    means2d = np.empty((n, 2), dtype=np.float64)
    means2d[:, 0] = camera.fx * tsafe[:, 0] / tz_safe + camera.cx
    means2d[:, 1] = camera.fy * tsafe[:, 1] / tz_safe + camera.cy
    radii = np.sqrt(np.maximum(np.stack([a, c], axis=1), 0.0))

    return {
        "valid": valid,
        "t": t,
        "depths": depths,
        "means2d": means2d,
        "cov2d": cov2d,
        "conics": conics,
        "radii": radii,
        "J": J,
        "M": M,
    }


def project(g, mesh, camera: Camera, near=0.01, dilation=0.3):
    """Single-splat projection (None when culled); color comes from the SH
    evaluated along the camera-center-to-splat direction."""
    from .. import gaussians as gmod
    from .. import sh as shlib

    mu = gmod.world_position(g, mesh)[None, :]
    cov = gmod.covariance(g)[None, :, :]
    out = project_arrays(mu, cov, camera, near=near, dilation=dilation)
    if not out["valid"][0]:
        return None
    d = mu[0] - camera.center
    d = d / np.linalg.norm(d)
    color = shlib.eval_sh(g.sh[None, :, :], d[None, :])[0]
    return ProjectedGaussian(
        mean2d=out["means2d"][0],
        cov2d=out["cov2d"][0],
        depth=float(out["depths"][0]),
        color=color,
        effective_opacity_base=g.opacity,
    )
