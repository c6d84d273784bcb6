"""Mesh-bound Gaussian cloud: parameters, reparameterizations, world-space
position/covariance assembly and binary serialization.

Every splat is anchored to one mesh face through barycentric weights and a
signed offset along the face normal, scaled by the face circumradius.  All
trainable quantities are stored unconstrained (logits / logs / raw
quaternions) so gradient steps need no projection:

* barycentric weights   w = softmax(bary_logits)
* normal offset         tau = 0.5 * tanh(tau_logit)      in [-0.5, 0.5]
* scales                s = exp(log_scale)
* opacity               sigma = sigmoid(opacity_logit)
* rotation              unit quaternion (w, x, y, z)
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import sh as shlib
from .mesh import TriangleMesh

CLOUD_MAGIC = b"MGSC"
CLOUD_VERSION = 1


class CloudError(Exception):
    pass


class CloudFormatError(CloudError):
    pass


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)

def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))

def inverse_sigmoid(y):
    return np.log(y / (1.0 - y))


def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_to_rotmat(q: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) (w, x, y, z) to rotation matrix/matrices."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1.0 - 2.0 * (y * y + z * z)
    R[..., 0, 1] = 2.0 * (x * y - w * z)
    R[..., 0, 2] = 2.0 * (x * z + w * y)
    R[..., 1, 0] = 2.0 * (x * y + w * z)
    R[..., 1, 1] = 1.0 - 2.0 * (x * x + z * z)
    R[..., 1, 2] = 2.0 * (y * z - w * x)
    R[..., 2, 0] = 2.0 * (x * z - w * y)
    R[..., 2, 1] = 2.0 * (y * z + w * x)
    R[..., 2, 2] = 1.0 - 2.0 * (x * x + y * y)
    return R


@dataclass
class BoundGaussian:
    """A single splat's parameters (record view; the cloud stores arrays)."""

    face: int
    bary_logits: np.ndarray
    tau_logit: float
    log_scale: np.ndarray
    rotation: np.ndarray
    opacity_logit: float
    sh: np.ndarray

    @property
    def bary_weights(self) -> np.ndarray:
        return softmax(np.asarray(self.bary_logits, dtype=np.float64))

    @property
    def tau(self) -> float:
        return 0.5 * float(np.tanh(self.tau_logit))

    @property
    def scale(self) -> np.ndarray:
        return np.exp(np.asarray(self.log_scale, dtype=np.float64))

    @property
    def opacity(self) -> float:
        return float(sigmoid(self.opacity_logit))


@dataclass
class GaussianCloud:
    """Structure-of-arrays container for the bound splats.

    faces        (N,)    int64 bound face indices
    bary_logits  (N, 3)
    tau_logits   (N,)
    log_scales   (N, 3)
    rotations    (N, 4)  quaternions, kept unit-norm by the optimizer
    opacity_logits (N,)
    sh           (N, k, 3) with k = (sh_degree+1)**2
    """

    faces: np.ndarray
    bary_logits: np.ndarray
    tau_logits: np.ndarray
    log_scales: np.ndarray
    rotations: np.ndarray
    opacity_logits: np.ndarray
    sh: np.ndarray
    sh_degree: int
    bound_mesh_hash: bytes = field(default=b"\x00" * 32)

    def __post_init__(self):
        n = len(self.faces)
        for name in ("bary_logits", "tau_logits", "log_scales", "rotations",
                     "opacity_logits", "sh"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            setattr(self, name, arr)
            if len(arr) != n:
                raise CloudError(f"{name} length {len(arr)} != {n}")
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        k = shlib.n_coeffs(self.sh_degree)
        if self.sh.shape[1:] != (k, 3):
            raise CloudError(f"sh must be (N, {k}, 3), got {self.sh.shape}")

    def __len__(self) -> int:
        return len(self.faces)

    def __getitem__(self, i: int) -> BoundGaussian:
        return BoundGaussian(
            face=int(self.faces[i]),
            bary_logits=self.bary_logits[i],
            tau_logit=float(self.tau_logits[i]),
            log_scale=self.log_scales[i],
            rotation=self.rotations[i],
            opacity_logit=float(self.opacity_logits[i]),
            sh=self.sh[i],
        )

    # -- derived quantities ------------------------------------------------

    @property
    def bary_weights(self) -> np.ndarray:
        return softmax(self.bary_logits, axis=1)

    @property
    def taus(self) -> np.ndarray:
        return 0.5 * np.tanh(self.tau_logits)

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)

    @property
    def opacities(self) -> np.ndarray:
        return sigmoid(self.opacity_logits)

    def copy(self) -> "GaussianCloud":
        return GaussianCloud(
            faces=self.faces.copy(),
            bary_logits=self.bary_logits.copy(),
            tau_logits=self.tau_logits.copy(),
            log_scales=self.log_scales.copy(),
            rotations=self.rotations.copy(),
            opacity_logits=self.opacity_logits.copy(),
            sh=self.sh.copy(),
            sh_degree=self.sh_degree,
            bound_mesh_hash=self.bound_mesh_hash,
        )

    def validate_binding(self, mesh: TriangleMesh):
        if len(self) and (self.faces.min() < 0 or self.faces.max() >= mesh.n_faces):
            raise CloudError("cloud references faces outside the bound mesh")


# ----------------------------------------------------------------------
# geometry assembly


def world_position(g: BoundGaussian, mesh: TriangleMesh) -> np.ndarray:
    """World-space mean of one splat: barycentric surface point plus the
    circumradius-scaled normal offset."""
    frame = mesh.face_frame(g.face)
    w = g.bary_weights
    verts = mesh.vertices[mesh.faces[g.face]]
    return w @ verts + g.tau * frame.circumradius * frame.normal


def world_positions(cloud: GaussianCloud, mesh: TriangleMesh) -> np.ndarray:
    """Vectorized world_position over the whole cloud: (N, 3)."""
    cloud.validate_binding(mesh)
    tri = mesh.faces[cloud.faces]                       # (N, 3)
    verts = mesh.vertices[tri]                          # (N, 3, 3)
    w = cloud.bary_weights                              # (N, 3)
    surface = (w[:, None, :] @ verts)[:, 0, :]
    normals = mesh.face_normals[cloud.faces]
    radii = mesh.face_circumradii[cloud.faces]
    return surface + (cloud.taus * radii)[:, None] * normals


def covariance(g: BoundGaussian) -> np.ndarray:
    """3x3 covariance from the rotation/scale factorization."""
    R = quat_to_rotmat(quat_normalize(np.asarray(g.rotation, dtype=np.float64)))
    M = R * g.scale[None, :]
    return M @ M.T


def covariances(cloud: GaussianCloud) -> np.ndarray:
    """(N, 3, 3) covariances for the whole cloud."""
    R = quat_to_rotmat(quat_normalize(cloud.rotations))
    M = R * cloud.scales[:, None, :]
    return M @ np.swapaxes(M, 1, 2)


def init_from_mesh(mesh: TriangleMesh, sh_degree: int = 0) -> GaussianCloud:
    """One splat per face: anchored at the centroid (uniform barycentric
    weights, zero offset), isotropic scale at half the face circumradius,
    opacity 0.5 and mid-gray color."""
    n = mesh.n_faces
    if n == 0:
        raise CloudError("cannot initialize from an empty mesh")
    k = shlib.n_coeffs(sh_degree)
    radii = mesh.face_circumradii
    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0
    return GaussianCloud(
        faces=np.arange(n, dtype=np.int64),
        bary_logits=np.zeros((n, 3)),
        tau_logits=np.zeros(n),
        log_scales=np.repeat(np.log(0.5 * radii)[:, None], 3, axis=1),
        rotations=rotations,
        opacity_logits=np.zeros(n),            # sigmoid(0) = 0.5
        sh=np.zeros((n, k, 3)),                # DC 0 -> mid-gray after offset
        sh_degree=sh_degree,
        bound_mesh_hash=mesh.content_hash(),
    )


# ----------------------------------------------------------------------
# serialization
#
# Layout (little-endian): magic 'MGSC', u32 version, u32 sh_degree,
# u64 count, 32-byte mesh hash, then per splat
#   u32 face | f32 bary_logits[3], tau_logit, log_scale[3], rotation[4],
#   opacity_logit | f32 sh[3k]

_HEADER = struct.Struct("<4sIIQ32s")


def save_cloud(cloud: GaussianCloud, path):
    k = shlib.n_coeffs(cloud.sh_degree)
    n = len(cloud)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CLOUD_MAGIC, CLOUD_VERSION, cloud.sh_degree, n,
                              cloud.bound_mesh_hash))
        params = np.concatenate(
            [
                cloud.bary_logits,
                cloud.tau_logits[:, None],
                cloud.log_scales,
                cloud.rotations,
                cloud.opacity_logits[:, None],
                cloud.sh.reshape(n, 3 * k),
            ],
            axis=1,
        ).astype("<f4")
        faces = cloud.faces.astype("<u4")
        record = np.empty(n, dtype=[("face", "<u4"), ("params", "<f4", 12 + 3 * k)])
        record["face"] = faces
        record["params"] = params
        fh.write(record.tobytes())


def load_cloud(path, expected_mesh_hash: bytes | None = None) -> GaussianCloud:
    """Read a cloud file; a mesh-hash mismatch warns but does not fail."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise CloudFormatError("truncated cloud file: short header")
        magic, version, sh_degree, n, mesh_hash = _HEADER.unpack(head)
        if magic != CLOUD_MAGIC:
            raise CloudFormatError(f"bad magic {magic!r}")
        if version != CLOUD_VERSION:
            raise CloudFormatError(f"unsupported cloud version {version}")
        if sh_degree > 3:
            raise CloudFormatError(f"unsupported sh_degree {sh_degree}")
        k = shlib.n_coeffs(sh_degree)
        dtype = np.dtype([("face", "<u4"), ("params", "<f4", 12 + 3 * k)])
        payload = fh.read()
    if len(payload) != n * dtype.itemsize:
        raise CloudFormatError(
            f"truncated cloud file: expected {n * dtype.itemsize} payload bytes, "
            f"got {len(payload)}")
    if expected_mesh_hash is not None and mesh_hash != expected_mesh_hash:
        warnings.warn("cloud was saved against a different mesh", stacklevel=2)
    record = np.frombuffer(payload, dtype=dtype)
    params = record["params"].astype(np.float64)
    return GaussianCloud(
        faces=record["face"].astype(np.int64),
        bary_logits=params[:, 0:3],
        tau_logits=params[:, 3],
        log_scales=params[:, 4:7],
        rotations=params[:, 7:11],
        opacity_logits=params[:, 11],
        sh=params[:, 12:].reshape(n, k, 3),
        sh_degree=sh_degree,
        bound_mesh_hash=mesh_hash,
    )
