"""Analytic gradients of the rendering loss with respect to every splat
parameter group.

The screen-space gradients come out of the rasterizer's adjoint kernel; this
module chains them through the projection (2D conic -> 2D covariance ->
world covariance and camera-space Jacobian), the covariance factorization
(rotation/scale), the SH color path, and the face binding (barycentric
logits and the normal-offset logit).  The bound face's frame is treated as a
constant: mesh vertices are not trainable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import sh as shlib
from ..gaussians import GaussianCloud, quat_normalize, quat_to_rotmat
from ..mesh import TriangleMesh
from ..render import kernels, render
from ..render.forward import RenderCache, RenderSettings
from . import losses


@dataclass
class ParamGrads:
    bary_logits: np.ndarray
    tau_logits: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    sh: np.ndarray
    # Per-splat gradient of the loss with respect to the projected mean in
    # half-image (NDC) units, the inherited densification signal; the split
    # criterion thresholds its running mean across views.
    mean2d: np.ndarray

    def group(self, name: str) -> np.ndarray:
        return getattr(self, name)


PARAM_GROUPS = ("bary_logits", "tau_logits", "log_scales", "rotations",
                "opacity_logits", "sh")


def _quat_rotmat_jacobian(q: np.ndarray) -> np.ndarray:
    """(N, 4, 3, 3) derivatives of quat_to_rotmat wrt the unit quaternion."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    zero = np.zeros_like(w)
    J = np.empty((len(q), 4, 3, 3), dtype=np.float64)
    J[:, 0] = 2.0 * np.stack([
        np.stack([zero, -z, y], axis=-1),
        np.stack([z, zero, -x], axis=-1),
        np.stack([-y, x, zero], axis=-1),
    ], axis=-2)
    J[:, 1] = 2.0 * np.stack([
        np.stack([zero, y, z], axis=-1),
        np.stack([y, -2.0 * x, -w], axis=-1),
        np.stack([z, w, -2.0 * x], axis=-1),
    ], axis=-2)
    J[:, 2] = 2.0 * np.stack([
        np.stack([-2.0 * y, x, w], axis=-1),
        np.stack([x, zero, z], axis=-1),
        np.stack([-w, z, -2.0 * y], axis=-1),
    ], axis=-2)
    J[:, 3] = 2.0 * np.stack([
        np.stack([-2.0 * z, -w, x], axis=-1),
        np.stack([w, -2.0 * z, y], axis=-1),
        np.stack([x, y, zero], axis=-1),
    ], axis=-2)
    return J


def backward(cloud: GaussianCloud, mesh: TriangleMesh, cache: RenderCache,
             dL_drgb: np.ndarray, lambda_r: float = 0.0,
             gamma: float = 1.0) -> ParamGrads:
    """Gradients of loss(render) [+ lambda_r * L_r] for every parameter
    group, given dL/d(rendered rgb)."""
    cam = cache.camera
    settings = cache.settings
    proj = cache.proj
    n = len(cloud)

    dmean2d, dconic, dcolor, dopac_sigma = kernels.rasterize_backward(
        cam.width, cam.height, cache.binning,
        np.ascontiguousarray(proj["means2d"]),
        np.ascontiguousarray(proj["conics"]),
        np.ascontiguousarray(cache.colors),
        np.ascontiguousarray(cache.opacities),
        proj["trunc_radii"],
        settings.background, settings.power_cutoff, settings.alpha_max,
        cache.final_T, cache.last_contrib, np.ascontiguousarray(dL_drgb))

    bad = ~np.isfinite(dmean2d).all(axis=1)
    if bad.any():
        raise FloatingPointError(
            f"non-finite gradient for gaussian {int(np.argmax(bad))} (mean2d)")

    valid = proj["valid"]
    live = valid[:, None]

    # --- conic -> 2x2 covariance -------------------------------------------
    conics = proj["conics"]
    Cmat = np.empty((n, 2, 2))
    Cmat[:, 0, 0] = conics[:, 0]
    Cmat[:, 0, 1] = Cmat[:, 1, 0] = conics[:, 1]
    Cmat[:, 1, 1] = conics[:, 2]
    dCmat = np.empty((n, 2, 2))
    dCmat[:, 0, 0] = dconic[:, 0]
    dCmat[:, 0, 1] = dCmat[:, 1, 0] = 0.5 * dconic[:, 1]
    dCmat[:, 1, 1] = dconic[:, 2]
    dcov2d = -np.einsum("nij,njk,nkl->nil", Cmat, dCmat, Cmat)

    # --- 2D covariance -> world covariance and Jacobian --------------------
    M = proj["M"]                                   # (N, 2, 3) = J @ R_w
    cov3d = cache.cov3d
    dSigma = np.einsum("nji,njk,nkl->nil", M, dcov2d, M)
    dM = 2.0 * np.einsum("nij,njk,nkl->nil", dcov2d, M, cov3d)
    dJ = dM @ cam.rotation.T

    # --- J(t) and pinhole projection -> camera-space point -----------------
    t = proj["t"]
    tz = np.where(valid, t[:, 2], 1.0)
    fx, fy = cam.fx, cam.fy
    inv_z2 = 1.0 / tz**2
    dt = np.zeros((n, 3))
    dt[:, 0] = dJ[:, 0, 2] * (-fx * inv_z2)
    dt[:, 1] = dJ[:, 1, 2] * (-fy * inv_z2)
    dt[:, 2] = (dJ[:, 0, 0] * (-fx * inv_z2)
                + dJ[:, 1, 1] * (-fy * inv_z2)
                + dJ[:, 0, 2] * (2.0 * fx * t[:, 0] / tz**3)
                + dJ[:, 1, 2] * (2.0 * fy * t[:, 1] / tz**3))
    dt += np.einsum("nij,ni->nj", proj["J"], dmean2d)
    dmu = dt @ cam.rotation

    # --- SH color path -> coefficients and view direction ------------------
    basis, mask = cache.sh_basis_mask
    k_active = shlib.n_coeffs(cache.active_sh_degree)
    dcolor_eff = np.where(mask, dcolor, 0.0)
    dsh = np.zeros_like(cloud.sh)
    dsh[:, :k_active, :] = basis[:, :, None] * dcolor_eff[:, None, :]
    basis_grad = shlib.sh_basis_grad(cache.active_sh_degree, cache.viewdirs)
    ddir = np.einsum("nkd,nkc,nc->nd", basis_grad,
                     cloud.sh[:, :k_active, :], dcolor_eff)
    d = cache.viewdirs
    r = cache.viewdists
    dmu += (ddir - d * np.einsum("nd,nd->n", d, ddir)[:, None]) / r[:, None]

    dmu = np.where(live, dmu, 0.0)
    dSigma = np.where(valid[:, None, None], dSigma, 0.0)

    # --- world covariance -> log scales, quaternion ------------------------
    qn = quat_normalize(cloud.rotations)
    R = quat_to_rotmat(qn)
    s = cloud.scales
    M3 = R * s[:, None, :]
    dM3 = 2.0 * np.einsum("nij,njk->nik", dSigma, M3)
    dlog_scales = np.einsum("nij,nij->nj", dM3, R) * s
    dR = dM3 * s[:, None, :]
    Jq = _quat_rotmat_jacobian(qn)
    dqn = np.einsum("nqij,nij->nq", Jq, dR)
    qnorm = np.linalg.norm(cloud.rotations, axis=1, keepdims=True)
    drot = (dqn - qn * np.einsum("nq,nq->n", qn, dqn)[:, None]) / qnorm

    # --- world position -> barycentric and offset logits -------------------
    tri = mesh.faces[cloud.faces]
    verts = mesh.vertices[tri]                      # (N, 3, 3)
    dw = np.einsum("nkd,nd->nk", verts, dmu)
    w = cloud.bary_weights
    dbary = w * (dw - np.einsum("nk,nk->n", w, dw)[:, None])
    normals = mesh.face_normals[cloud.faces]
    radii = mesh.face_circumradii[cloud.faces]
    dtau = np.einsum("nd,nd->n", normals, dmu) * radii
    th = np.tanh(cloud.tau_logits)
    dtau_logits = dtau * 0.5 * (1.0 - th * th)

    dopacity_logits = dopac_sigma * cache.opacities * (1.0 - cache.opacities)

    if lambda_r != 0.0:
        _, dlr = losses.regularization_loss_grad(cloud, mesh, gamma)
        dlog_scales = dlog_scales + lambda_r * dlr

    half = np.array([cam.width * 0.5, cam.height * 0.5])
    return ParamGrads(
        bary_logits=dbary,
        tau_logits=dtau_logits,
        log_scales=dlog_scales,
        rotations=drot,
        opacity_logits=dopacity_logits,
        sh=dsh,
        mean2d=dmean2d * half[None, :],
    )


def loss_and_gradients(cloud: GaussianCloud, mesh: TriangleMesh, camera,
                       target: np.ndarray,
                       settings: RenderSettings | None = None,
                       lambda_dssim: float = 0.2, lambda_r: float = 0.0,
                       gamma: float = 1.0,
                       active_sh_degree: int | None = None):
    """Forward render + full analytic backward.

    Returns (total_loss, ParamGrads, Framebuffer).
    """
    fb, cache = render(cloud, mesh, camera, settings=settings,
                       active_sh_degree=active_sh_degree, return_cache=True)
    value, dL_drgb = losses.photometric_loss_grad(fb.rgb, target, lambda_dssim)
    if lambda_r != 0.0:
        value += lambda_r * losses.regularization_loss(cloud, mesh, gamma)
    grads = backward(cloud, mesh, cache, dL_drgb,
                     lambda_r=lambda_r, gamma=gamma)
    return value, grads, fb
