import numpy as np
import pytest

from meshsplat.camera import Camera
from meshsplat.gaussians import GaussianCloud, init_from_mesh
from meshsplat.mesh import TriangleMesh, icosphere


def make_mesh(kind="icosphere", **kw) -> TriangleMesh:
    if kind == "icosphere":
        return icosphere(kw.get("subdivisions", 1))
    raise ValueError(kind)


def rotation_z(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_y(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    from meshsplat.gaussians import quat_to_rotmat
    return quat_to_rotmat(q)


def randomized_cloud(mesh, rng, sh_degree=1, n=None,
                     bary_sigma=0.4, tau_sigma=0.5, scale_sigma=0.25,
                     rot_sigma=0.2, opacity_sigma=0.8, sh_sigma=0.15):
    """Cloud with perturbed parameters; optionally subsampled to n splats."""
    cloud = init_from_mesh(mesh, sh_degree=sh_degree)
    if n is not None and n < len(cloud):
        keep = rng.choice(len(cloud), size=n, replace=False)
        keep.sort()
        cloud = GaussianCloud(
            faces=cloud.faces[keep],
            bary_logits=cloud.bary_logits[keep],
            tau_logits=cloud.tau_logits[keep],
            log_scales=cloud.log_scales[keep],
            rotations=cloud.rotations[keep],
            opacity_logits=cloud.opacity_logits[keep],
            sh=cloud.sh[keep],
            sh_degree=cloud.sh_degree,
            bound_mesh_hash=cloud.bound_mesh_hash,
        )
    m = len(cloud)
    cloud.bary_logits += rng.normal(0, bary_sigma, (m, 3))
    cloud.tau_logits += rng.normal(0, tau_sigma, m)
    cloud.log_scales += rng.normal(0, scale_sigma, (m, 3))
    cloud.rotations += rng.normal(0, rot_sigma, (m, 4))
    cloud.rotations /= np.linalg.norm(cloud.rotations, axis=1, keepdims=True)
    cloud.opacity_logits += rng.normal(0, opacity_sigma, m)
    cloud.sh += rng.normal(0, sh_sigma, cloud.sh.shape)
    return cloud


def orbit_camera(azimuth, elevation=0.3, radius=3.0, width=64, height=64,
                 fx=None):
    eye = radius * np.array([
        np.cos(elevation) * np.sin(azimuth),
        np.sin(elevation),
        -np.cos(elevation) * np.cos(azimuth),
    ])
    return Camera.look_at(eye=eye, target=(0, 0, 0), width=width,
                          height=height, fx=fx or 0.9 * max(width, height))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
