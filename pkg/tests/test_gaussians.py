import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from meshsplat import sh as shlib
from meshsplat.gaussians import (BoundGaussian, CloudFormatError,
                                 covariance, covariances, init_from_mesh,
                                 load_cloud, quat_to_rotmat, save_cloud,
                                 world_position, world_positions)
from meshsplat.mesh import TriangleMesh, icosahedron

from conftest import randomized_cloud, rotation_z


def make_gaussian(face=0, bary=(0.0, 0.0, 0.0), tau_logit=0.0,
                  log_scale=(0.0, 0.0, 0.0), rotation=(1.0, 0, 0, 0),
                  opacity_logit=0.0, sh=None, degree=0):
    k = shlib.n_coeffs(degree)
    return BoundGaussian(
        face=face,
        bary_logits=np.asarray(bary, dtype=np.float64),
        tau_logit=tau_logit,
        log_scale=np.asarray(log_scale, dtype=np.float64),
        rotation=np.asarray(rotation, dtype=np.float64),
        opacity_logit=opacity_logit,
        sh=np.zeros((k, 3)) if sh is None else np.asarray(sh, float),
    )


# ---------------------------------------------------------- world position

def test_world_position_centroid():
    mesh = icosahedron()
    g = make_gaussian(face=3)
    np.testing.assert_allclose(world_position(g, mesh),
                               mesh.face_centroids[3], atol=1e-12)


def test_world_position_with_normal_offset():
    mesh = TriangleMesh([[0, 0, 0], [2, 0, 0], [0, 2, 0]], [[0, 1, 2]])
    # tanh(25) rounds to 1.0 in float64, so tau is exactly 0.5
    g = make_gaussian(tau_logit=25.0)
    mu = world_position(g, mesh)
    np.testing.assert_allclose(mu, [2 / 3, 2 / 3, np.sqrt(2.0) / 2],
                               atol=1e-12)


def test_world_position_corner():
    mesh = icosahedron()
    g = make_gaussian(face=7, bary=(60.0, 0.0, 0.0))
    va = mesh.vertices[mesh.faces[7][0]]
    np.testing.assert_allclose(world_position(g, mesh), va, atol=1e-12)


def test_world_positions_batch_matches_scalar(rng):
    mesh = icosahedron()
    cloud = randomized_cloud(mesh, rng)
    batch = world_positions(cloud, mesh)
    for i in range(0, len(cloud), 5):
        np.testing.assert_allclose(batch[i], world_position(cloud[i], mesh),
                                   atol=1e-12)


def test_world_position_affine_equivariance(rng):
    mesh = icosahedron()
    g = make_gaussian(face=2, bary=tuple(rng.normal(size=3)), tau_logit=0.0)
    A = rng.normal(size=(3, 3))
    b = rng.normal(size=3)
    mu = world_position(g, mesh)
    moved = TriangleMesh(mesh.vertices @ A.T + b, mesh.faces)
    mu2 = world_position(g, moved)
    np.testing.assert_allclose(mu2, A @ mu + b, atol=1e-9)


# ------------------------------------------------------------- covariance

def test_covariance_identity():
    g = make_gaussian()
    np.testing.assert_allclose(covariance(g), np.eye(3), atol=1e-15)


def test_covariance_rotated_anisotropic():
    q = np.array([np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)])  # 90 deg z
    g = make_gaussian(log_scale=np.log([2.0, 1.0, 1.0]), rotation=q)
    np.testing.assert_allclose(covariance(g), np.diag([1.0, 4.0, 1.0]),
                               atol=1e-12)


def test_covariance_determinant(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    s = np.exp(rng.normal(size=3))
    g = make_gaussian(log_scale=np.log(s), rotation=q)
    assert np.linalg.det(covariance(g)) == pytest.approx(np.prod(s) ** 2,
                                                         rel=1e-9)


def test_covariance_eigen_roundtrip(rng):
    mesh = icosahedron()
    cloud = randomized_cloud(mesh, rng)
    covs = covariances(cloud)
    vals, vecs = np.linalg.eigh(covs)
    recon = np.einsum("nij,nj,nkj->nik", vecs, vals, vecs)
    assert np.abs(recon - covs).max() < 1e-9
    # eigenvalues are the squared scales up to ordering
    np.testing.assert_allclose(np.sort(vals, axis=1),
                               np.sort(cloud.scales**2, axis=1), rtol=1e-9)


# ---------------------------------------------------------- initialization

def test_init_from_mesh_centroids():
    mesh = icosahedron()
    cloud = init_from_mesh(mesh, sh_degree=0)
    assert len(cloud) == 20
    np.testing.assert_allclose(world_positions(cloud, mesh),
                               mesh.face_centroids, atol=1e-12)


def test_init_taus_zero_on_surface():
    mesh = icosahedron()
    cloud = init_from_mesh(mesh)
    assert np.all(cloud.taus == 0.0)


def test_init_scale_is_half_circumradius():
    mesh = icosahedron()
    cloud = init_from_mesh(mesh)
    ratio = cloud.scales.max(axis=1) / mesh.face_circumradii
    np.testing.assert_allclose(ratio, 0.5, rtol=1e-12)
    assert np.all(cloud.opacities == 0.5)


# ------------------------------------------------------------------- SH

def test_eval_sh_degree0_is_offset_gray():
    color = shlib.eval_sh(np.zeros((1, 1, 3)), np.array([[0.0, 0.0, 1.0]]))
    np.testing.assert_allclose(color, 0.5)


def test_eval_sh_degree0_direction_invariant(rng):
    sh = rng.normal(0, 0.2, (1, 1, 3))
    dirs = rng.normal(size=(8, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    colors = shlib.eval_sh(np.repeat(sh, 8, axis=0), dirs)
    assert np.ptp(colors, axis=0).max() < 1e-15


def test_eval_sh_degree1_odd_parity():
    sh = np.zeros((1, 4, 3))
    sh[0, 2, :] = 0.3          # the z-linear band
    up = shlib.eval_sh(sh, np.array([[0.0, 0.0, 1.0]]))[0]
    down = shlib.eval_sh(sh, np.array([[0.0, 0.0, -1.0]]))[0]
    np.testing.assert_allclose(up - 0.5, -(down - 0.5), atol=1e-12)
    assert up[0] == pytest.approx(0.5 + shlib.C1 * 0.3)


def test_eval_sh_clamps():
    sh = np.zeros((1, 1, 3))
    sh[0, 0, 0] = 10.0
    sh[0, 0, 1] = -10.0
    color = shlib.eval_sh(sh, np.array([[0.0, 0.0, 1.0]]))[0]
    assert color[0] == 1.0 and color[1] == 0.0


# ------------------------------------------------------------ serialization

def test_cloud_roundtrip_bit_identical(tmp_path, rng):
    mesh = icosahedron()
    cloud = randomized_cloud(mesh, rng, sh_degree=2)
    # store-precision values so the round trip is exact
    for name in ("bary_logits", "tau_logits", "log_scales", "rotations",
                 "opacity_logits", "sh"):
        arr = getattr(cloud, name)
        arr[:] = arr.astype(np.float32).astype(np.float64)
    path = tmp_path / "cloud.mgsc"
    save_cloud(cloud, path)
    loaded = load_cloud(path, expected_mesh_hash=mesh.content_hash())
    assert loaded.sh_degree == 2
    for name in ("faces", "bary_logits", "tau_logits", "log_scales",
                 "rotations", "opacity_logits", "sh"):
        assert np.array_equal(getattr(loaded, name), getattr(cloud, name))


def test_cloud_mesh_hash_mismatch_warns(tmp_path, rng):
    mesh = icosahedron()
    cloud = randomized_cloud(mesh, rng)
    path = tmp_path / "cloud.mgsc"
    save_cloud(cloud, path)
    with pytest.warns(UserWarning, match="different mesh"):
        loaded = load_cloud(path, expected_mesh_hash=b"\x01" * 32)
    assert len(loaded) == len(cloud)


def test_cloud_truncated_file_rejected(tmp_path, rng):
    mesh = icosahedron()
    cloud = randomized_cloud(mesh, rng)
    path = tmp_path / "cloud.mgsc"
    save_cloud(cloud, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) - 7])
    with pytest.raises(CloudFormatError, match="truncated"):
        load_cloud(path)


def test_cloud_bad_magic(tmp_path):
    path = tmp_path / "bad.mgsc"
    path.write_bytes(b"NOPE" + b"\x00" * 60)
    with pytest.raises(CloudFormatError, match="magic"):
        load_cloud(path)


# --------------------------------------------------------------- properties

finite_floats = st.floats(min_value=-30, max_value=30, allow_nan=False)


@settings(deadline=None, max_examples=60)
@given(hnp.arrays(np.float64, (3,), elements=finite_floats),
       finite_floats, hnp.arrays(np.float64, (3,), elements=finite_floats),
       finite_floats)
def test_reparameterization_ranges(bary, tau_logit, log_scale, opacity_logit):
    g = make_gaussian(bary=bary, tau_logit=tau_logit,
                      log_scale=np.clip(log_scale, -20, 20),
                      opacity_logit=opacity_logit)
    w = g.bary_weights
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(w >= 0.0)
    assert -0.5 <= g.tau <= 0.5
    assert 0.0 < g.opacity < 1.0
    assert np.all(g.scale > 0.0)


def test_quaternion_normalized_rotation(rng):
    q = rng.normal(size=4)
    g = make_gaussian(rotation=q)
    cov = covariance(g)
    # normalization inside covariance: same result as pre-normalized input
    g2 = make_gaussian(rotation=q / np.linalg.norm(q))
    np.testing.assert_allclose(cov, covariance(g2), atol=1e-12)
    R = quat_to_rotmat(np.asarray(q) / np.linalg.norm(q))
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
