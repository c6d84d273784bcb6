"""Adaptive cloud growth and pruning.

Growth subdivides the bound face of any splat whose accumulated screen-space
positional gradient exceeds the threshold, and replaces the splat with four
children, one per child face: centered barycentrically, offset and
appearance inherited, scales halved to track the halved circumcircle.
"""

from __future__ import annotations

import numpy as np

from ..gaussians import GaussianCloud
from ..mesh import TriangleMesh


class GradAccumulator:
    """Running mean of per-splat screen-gradient magnitude across views."""

    def __init__(self, n: int):
        self.sums = np.zeros(n)
        self.counts = np.zeros(n, dtype=np.int64)

    def add(self, mean2d_grads: np.ndarray, seen: np.ndarray) -> None:
        norms = np.linalg.norm(mean2d_grads, axis=1)
        self.sums[seen] += norms[seen]
        self.counts[seen] += 1

    def means(self) -> np.ndarray:
        return self.sums / np.maximum(self.counts, 1)

    def reset(self, n: int) -> None:
        self.sums = np.zeros(n)
        self.counts = np.zeros(n, dtype=np.int64)


def densify_step(cloud: GaussianCloud, mesh: TriangleMesh,
                 accumulator: GradAccumulator, threshold: float):
    """Split every splat whose mean accumulated gradient exceeds `threshold`.

    Mutates `mesh` in place (face splits), returns (new_cloud, mapping,
    n_split) where mapping[i] is the source row of new splat i (-1 for
    children) so optimizer state can follow.
    """
    flagged = np.flatnonzero(accumulator.means() > threshold)
    if len(flagged) == 0:
        return cloud, np.arange(len(cloud), dtype=np.int64), 0

    keep = np.ones(len(cloud), dtype=bool)
    keep[flagged] = False
    child_rows = {name: [] for name in
                  ("faces", "bary_logits", "tau_logits", "log_scales",
                   "rotations", "opacity_logits", "sh")}
    for gi in flagged:
        child_faces = mesh.split_face(int(cloud.faces[gi]))
        for cf in child_faces:
            child_rows["faces"].append(cf)
            child_rows["bary_logits"].append(np.zeros(3))
            child_rows["tau_logits"].append(cloud.tau_logits[gi])
            child_rows["log_scales"].append(cloud.log_scales[gi] - np.log(2.0))
            child_rows["rotations"].append(cloud.rotations[gi].copy())
            child_rows["opacity_logits"].append(cloud.opacity_logits[gi])
            child_rows["sh"].append(cloud.sh[gi].copy())

    def cat(name):
        base = getattr(cloud, name)[keep]
        extra = np.asarray(child_rows[name], dtype=base.dtype)
        return np.concatenate([base, extra.reshape((-1,) + base.shape[1:])])

    new_cloud = GaussianCloud(
        faces=cat("faces"),
        bary_logits=cat("bary_logits"),
        tau_logits=cat("tau_logits"),
        log_scales=cat("log_scales"),
        rotations=cat("rotations"),
        opacity_logits=cat("opacity_logits"),
        sh=cat("sh"),
        sh_degree=cloud.sh_degree,
        bound_mesh_hash=mesh.content_hash(),
    )
    mapping = np.concatenate([
        np.flatnonzero(keep),
        np.full(4 * len(flagged), -1, dtype=np.int64),
    ])
    return new_cloud, mapping, len(flagged)


def prune_step(cloud: GaussianCloud, mesh: TriangleMesh,
               opacity_threshold: float = 0.005,
               scale_radius_limit: float = 10.0):
    """Drop splats that are nearly transparent or have run away in size
    (max scale beyond `scale_radius_limit` times the face circumradius)."""
    radii = mesh.face_circumradii[cloud.faces]
    keep = (cloud.opacities >= opacity_threshold) & \
           (cloud.scales.max(axis=1) <= scale_radius_limit * radii)
    if keep.all():
        return cloud, np.arange(len(cloud), dtype=np.int64)
    kept = np.flatnonzero(keep)
    new_cloud = GaussianCloud(
        faces=cloud.faces[kept],
        bary_logits=cloud.bary_logits[kept],
        tau_logits=cloud.tau_logits[kept],
        log_scales=cloud.log_scales[kept],
        rotations=cloud.rotations[kept],
        opacity_logits=cloud.opacity_logits[kept],
        sh=cloud.sh[kept],
        sh_degree=cloud.sh_degree,
        bound_mesh_hash=cloud.bound_mesh_hash,
    )
    return new_cloud, kept
