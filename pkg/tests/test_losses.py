import numpy as np
import pytest

from meshsplat.gaussians import init_from_mesh
from meshsplat.mesh import icosahedron
from meshsplat.optim import losses


def reference_ssim(x, y):
    """Independent SSIM oracle: literal per-pixel window loops over the
    zero-padded image with an explicit 11x11 Gaussian window."""
    radius, sigma = 5, 1.5
    ax = np.arange(-radius, radius + 1, dtype=float)
    w1 = np.exp(-(ax**2) / (2 * sigma**2))
    w1 /= w1.sum()
    window = np.outer(w1, w1)
    c1, c2 = 0.01**2, 0.03**2

    def pad(img):
        return np.pad(img, ((radius, radius), (radius, radius), (0, 0)))

    xp, yp = pad(x), pad(y)
    h, wdt, ch = x.shape
    total = 0.0
    for i in range(h):
        for j in range(wdt):
            for c in range(ch):
                wx = xp[i:i + 11, j:j + 11, c]
                wy = yp[i:i + 11, j:j + 11, c]
                mx = (window * wx).sum()
                my = (window * wy).sum()
                sxx = (window * wx * wx).sum() - mx * mx
                syy = (window * wy * wy).sum() - my * my
                sxy = (window * wx * wy).sum() - mx * my
                total += ((2 * mx * my + c1) * (2 * sxy + c2)) / (
                    (mx * mx + my * my + c1) * (sxx + syy + c2))
    return total / (h * wdt * ch)


def test_photometric_identical_is_zero(rng):
    img = rng.random((12, 12, 3))
    assert losses.photometric_loss(img, img, 0.2) == pytest.approx(0.0,
                                                                   abs=1e-12)


def test_photometric_black_vs_white_l1():
    black = np.zeros((8, 8, 3))
    white = np.ones((8, 8, 3))
    assert losses.photometric_loss(black, white, 0.0) == pytest.approx(1.0)


def test_photometric_matches_reference_composition(rng):
    x = rng.random((16, 16, 3))
    y = np.clip(x + rng.normal(0, 0.15, x.shape), 0, 1)
    lam = 0.2
    expected = 0.8 * np.abs(x - y).mean() + lam * (1.0 - reference_ssim(x, y))
    got = losses.photometric_loss(x, y, lam)
    assert got == pytest.approx(expected, rel=1e-10)


def test_photometric_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        losses.photometric_loss(np.zeros((4, 4, 3)), np.zeros((5, 4, 3)))


def test_ssim_gradient_matches_finite_differences(rng):
    x = rng.random((10, 10, 3))
    y = np.clip(x + rng.normal(0, 0.1, x.shape), 0, 1)
    value, grad = losses.photometric_loss_grad(x, y, lambda_dssim=0.7)
    h = 1e-6
    idx = [(2, 3, 0), (0, 0, 1), (9, 9, 2), (5, 1, 1), (4, 7, 0)]
    for i in idx:
        xp = x.copy(); xp[i] += h
        xm = x.copy(); xm[i] -= h
        fd = (losses.photometric_loss(xp, y, 0.7)
              - losses.photometric_loss(xm, y, 0.7)) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_psnr_perfect_and_known():
    x = np.zeros((4, 4, 3))
    assert losses.psnr(x, x) == np.inf
    y = np.full((4, 4, 3), 0.1)
    assert losses.psnr(x, y) == pytest.approx(20.0)


# ----------------------------------------------------------- regularizer

def _cloud_with_scales(scale_rows):
    mesh = icosahedron()
    cloud = init_from_mesh(mesh)
    cloud.log_scales[:] = -10.0          # tiny: no violations
    for i, s in enumerate(scale_rows):
        cloud.log_scales[i] = np.log(s)
    return cloud, mesh


def test_regularizer_single_offender():
    # scales (0.3, 0.1, 0.1) against an effective radius of 0.2
    cloud, mesh = _cloud_with_scales([[0.3, 0.1, 0.1]])
    r0 = mesh.face_circumradii[0]
    gamma = 0.2 / r0
    assert losses.regularization_loss(cloud, mesh, gamma) == pytest.approx(
        0.1, rel=1e-12)


def test_regularizer_inactive_hinge():
    cloud, mesh = _cloud_with_scales([])
    assert losses.regularization_loss(cloud, mesh, 1.0) == 0.0
    _, grad = losses.regularization_loss_grad(cloud, mesh, 1.0)
    assert np.all(grad == 0.0)


def test_regularizer_additivity():
    mesh = icosahedron()
    cloud = init_from_mesh(mesh)
    cloud.log_scales[:] = -10.0
    r = mesh.face_circumradii
    gamma = 1.0
    cloud.log_scales[3] = np.log(r[3] * gamma + 0.05)
    cloud.log_scales[9] = np.log(r[9] * gamma + 0.15)
    assert losses.regularization_loss(cloud, mesh, gamma) == pytest.approx(
        0.20, rel=1e-9)
    assert losses.scale_violations(cloud, mesh, gamma) == 2


def test_regularizer_gradient_finite_difference(rng):
    mesh = icosahedron()
    cloud = init_from_mesh(mesh)
    cloud.log_scales += rng.normal(0, 0.8, cloud.log_scales.shape)
    gamma = 1.0
    _, grad = losses.regularization_loss_grad(cloud, mesh, gamma)
    h = 1e-7
    for i in range(0, 20, 3):
        for j in range(3):
            c1 = cloud.copy(); c1.log_scales[i, j] += h
            c2 = cloud.copy(); c2.log_scales[i, j] -= h
            fd = (losses.regularization_loss(c1, mesh, gamma)
                  - losses.regularization_loss(c2, mesh, gamma)) / (2 * h)
            assert grad[i, j] == pytest.approx(fd, rel=1e-4, abs=1e-9)
