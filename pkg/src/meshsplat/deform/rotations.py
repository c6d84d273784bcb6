"""Quaternion / rotation-vector utilities used by the deformation pipeline,
including the log-space rotation blending the transfer step needs."""

from __future__ import annotations

import numpy as np

from ..gaussians import quat_normalize, quat_to_rotmat

__all__ = ["quat_to_rotmat", "quat_normalize", "rotmat_to_quat", "quat_log",
           "rotvec_to_quat", "blend_rotations", "blend_rotations_batch"]


def rotmat_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix/matrices to unit quaternion (w, x, y, z), w >= 0."""
    R = np.asarray(R, dtype=np.float64)
    single = R.ndim == 2
    if single:
        R = R[None]
    m00, m01, m02 = R[:, 0, 0], R[:, 0, 1], R[:, 0, 2]
    m10, m11, m12 = R[:, 1, 0], R[:, 1, 1], R[:, 1, 2]
    m20, m21, m22 = R[:, 2, 0], R[:, 2, 1], R[:, 2, 2]
    q = np.empty((len(R), 4))
    trace = m00 + m11 + m22

    # Shepperd's branch per matrix (vectorized via masks).
    c0 = trace > 0.0
    s = np.sqrt(np.where(c0, trace + 1.0, 1.0)) * 2.0
    q0 = np.stack([0.25 * s, (m21 - m12) / s, (m02 - m20) / s,
                   (m10 - m01) / s], axis=1)
    c1 = (~c0) & (m00 > m11) & (m00 > m22)
    s = np.sqrt(np.where(c1, 1.0 + m00 - m11 - m22, 1.0)) * 2.0
    q1 = np.stack([(m21 - m12) / s, 0.25 * s, (m01 + m10) / s,
                   (m02 + m20) / s], axis=1)
    c2 = (~c0) & (~c1) & (m11 > m22)
    s = np.sqrt(np.where(c2, 1.0 + m11 - m00 - m22, 1.0)) * 2.0
    q2 = np.stack([(m02 - m20) / s, (m01 + m10) / s, 0.25 * s,
                   (m12 + m21) / s], axis=1)
    c3 = (~c0) & (~c1) & (~c2)
    s = np.sqrt(np.where(c3, 1.0 + m22 - m00 - m11, 1.0)) * 2.0
    q3 = np.stack([(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s,
                   0.25 * s], axis=1)

    q = np.where(c0[:, None], q0,
                 np.where(c1[:, None], q1,
                          np.where(c2[:, None], q2, q3)))
    q = quat_normalize(q)
    q = np.where(q[:, :1] < 0.0, -q, q)
    return q[0] if single else q


def quat_log(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of unit quaternions; angle is
    2*atan2(|v|, w) which lands in [0, 2pi) so sign-aligned quaternions map
    consistently."""
    q = np.asarray(q, dtype=np.float64)
    v = q[..., 1:]
    w = q[..., 0]
    nv = np.linalg.norm(v, axis=-1)
    angle = 2.0 * np.arctan2(nv, w)
    small = nv < 1e-12
    scale = np.where(small, 2.0 / np.where(np.abs(w) > 1e-12, w, 1.0),
                     angle / np.where(small, 1.0, nv))
    return v * scale[..., None]


def rotvec_to_quat(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    angle = np.linalg.norm(r, axis=-1)
    half = 0.5 * angle
    small = angle < 1e-12
    k = np.where(small, 0.5, np.sin(half) / np.where(small, 1.0, angle))
    q = np.concatenate([np.cos(half)[..., None], r * k[..., None]], axis=-1)
    return q


def _near_pi_apart(quats: np.ndarray, pi_margin: float) -> np.ndarray:
    """Per triple: any pair of rotations >= (pi - margin) apart.

    The relative angle is 2*acos(|q_i . q_j|); comparing the dot against
    cos((pi - margin)/2) avoids the arccos."""
    dots = np.abs(np.einsum("nik,njk->nij", quats, quats))
    threshold = np.cos(0.5 * (np.pi - pi_margin))
    return (dots <= threshold).any(axis=(1, 2))


def blend_rotations_batch(quats: np.ndarray, weights: np.ndarray,
                          pi_margin: float = 1e-6):
    """Log-space blend of rotation triples.

    quats (N, 3, 4) unit quaternions, weights (N, 3) convex.  Signs are
    aligned to each triple's first quaternion before the log so antipodal
    representations cannot cancel.  Returns (rotmats (N, 3, 3),
    warn (N,) bool) where warn marks triples whose members are >= pi apart
    (the log map is ambiguous there).
    """
    quats = np.asarray(quats, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    sign = np.where(np.einsum("nk,nik->ni", quats[:, 0, :], quats) < 0.0,
                    -1.0, 1.0)
    aligned = quats * sign[:, :, None]
    logs = quat_log(aligned)                              # (N, 3, 3)
    blended = (weights[:, None, :] @ logs)[:, 0, :]
    R = quat_to_rotmat(rotvec_to_quat(blended))
    return R, _near_pi_apart(quats, pi_margin)


def blend_rotations(rotations, weights, pi_margin: float = 1e-6):
    """Single-triple convenience wrapper; accepts three rotation matrices or
    three quaternions.  Returns (rotation matrix, warned)."""
    rotations = np.asarray(rotations, dtype=np.float64)
    if rotations.shape == (3, 3, 3):
        quats = rotmat_to_quat(rotations)
    elif rotations.shape == (3, 4):
        quats = quat_normalize(rotations)
    else:
        raise ValueError("expected three rotation matrices or quaternions")
    R, warn = blend_rotations_batch(quats[None], np.asarray(weights)[None],
                                    pi_margin)
    return R[0], bool(warn[0])
