"""Carry a mesh deformation over to the bound splats.

Per splat, the three bound-face vertices contribute barycentrically: their
displacement moves the mean, their rotation factors blend in log space and
their shear factors blend linearly, composing the local map T = R_blend @
S_blend that reshapes the covariance (T Sigma T^T).  View-dependent color is
preserved by querying the SH with the inversely rotated direction.
"""

from __future__ import annotations

import numpy as np

from .. import gaussians as gmod
from ..gaussians import GaussianCloud
from ..mesh import TriangleMesh
from ..render.forward import DeformedGaussians
from .arap import DeformState
from .rotations import blend_rotations_batch


def transfer(cloud: GaussianCloud, mesh: TriangleMesh, state: DeformState,
             rotate_normal_offset: bool = True) -> DeformedGaussians:
    """Deformed render inputs for the cloud under `state`.

    With `rotate_normal_offset` (default), the normal-offset part of each
    splat's position co-rotates with the blended local rotation, so a rigid
    motion of the mesh moves off-surface splats rigidly too.  Disabling it
    leaves the rest-pose offset direction fixed (surface displacement only).
    """
    if state.deformed_vertices.shape != mesh.vertices.shape:
        raise ValueError("deform state does not cover the mesh vertices")
    cloud.validate_binding(mesh)
    tri = mesh.faces[cloud.faces]                     # (N, 3)
    w = cloud.bary_weights                            # (N, 3)

    v_rest = mesh.vertices[tri]                       # (N, 3, 3)
    v_def = state.deformed_vertices[tri]
    delta = (w[:, None, :] @ (v_def - v_rest))[:, 0, :]

    R_blend, warn = blend_rotations_batch(state.rotations[tri], w)
    # Written as I + sum w_k (S_k - I) so an identity state stays exactly
    # identity regardless of barycentric rounding (the plain weighted sum
    # differs only by the float rounding of sum(w) = 1).
    shear_dev = state.shears[tri] - np.eye(3)[None, None, :, :]
    S_blend = np.eye(3)[None, :, :] + (
        w[:, None, :] @ shear_dev.reshape(len(w), 3, 9)).reshape(-1, 3, 3)
    T = R_blend @ S_blend

    means = gmod.world_positions(cloud, mesh)
    means_def = means + delta
    if rotate_normal_offset:
        normals = mesh.face_normals[cloud.faces]
        tau_r = (cloud.taus * mesh.face_circumradii[cloud.faces])[:, None]
        rotated_n = np.einsum("nij,nj->ni", R_blend, normals)
        means_def = means_def + tau_r * (rotated_n - normals)

    cov = gmod.covariances(cloud)
    cov_def = T @ cov @ np.swapaxes(T, 1, 2)
    return DeformedGaussians(means=means_def, covariances=cov_def,
                             view_rotations=R_blend)


def bake_cloud(cloud: GaussianCloud, mesh: TriangleMesh, state: DeformState,
               deformed_mesh: TriangleMesh,
               rotate_normal_offset: bool = True) -> GaussianCloud:
    """Re-express the transferred splats as a cloud bound to the deformed
    mesh (same faces and barycentric weights; covariance refit from the
    transferred one; offset re-projected onto the deformed face normal,
    which is exact for rigid motions)."""
    deformed = transfer(cloud, mesh, state,
                        rotate_normal_offset=rotate_normal_offset)
    tri = deformed_mesh.faces[cloud.faces]
    w = cloud.bary_weights
    surface = np.einsum("nk,nkd->nd", w, deformed_mesh.vertices[tri])
    normals = deformed_mesh.face_normals[cloud.faces]
    radii = deformed_mesh.face_circumradii[cloud.faces]
    tau = np.einsum("nd,nd->n", deformed.means - surface, normals) / radii
    tau = np.clip(tau, -0.5 + 1e-9, 0.5 - 1e-9)
    tau_logits = np.arctanh(2.0 * tau)

    eigvals, eigvecs = np.linalg.eigh(deformed.covariances)
    eigvals = np.maximum(eigvals, 1e-24)
    det = np.linalg.det(eigvecs)
    eigvecs = eigvecs.copy()
    eigvecs[:, :, 2] *= np.where(det < 0.0, -1.0, 1.0)[:, None]
    from .rotations import rotmat_to_quat

    return GaussianCloud(
        faces=cloud.faces.copy(),
        bary_logits=cloud.bary_logits.copy(),
        tau_logits=tau_logits,
        log_scales=0.5 * np.log(eigvals),
        rotations=rotmat_to_quat(eigvecs),
        opacity_logits=cloud.opacity_logits.copy(),
        sh=cloud.sh.copy(),
        sh_degree=cloud.sh_degree,
        bound_mesh_hash=deformed_mesh.content_hash(),
    )
