"""Forward rendering orchestration: assemble world-space Gaussians, project,
bin, and composite through the selected kernel backend."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .. import gaussians as gmod
from .. import sh as shlib
from ..camera import Camera
from ..gaussians import GaussianCloud
from ..mesh import TriangleMesh
from . import kernels
from .projection import project_arrays
from .reference import composite_bruteforce
from .tiles import TileBinning, tile_bin


class RenderError(Exception):
    pass


@dataclass
class RenderSettings:
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))
    truncation_sigmas: float = 3.0
    tile_size: int = 16
    near: float = 0.01
    dilation: float = 0.3
    term_transmittance: float = 1.0 / 255.0
    alpha_max: float = 1.0 - 1e-6

    def __post_init__(self):
        self.background = np.ascontiguousarray(self.background, dtype=np.float64)

    @property
    def power_cutoff(self) -> float:
        return 0.5 * self.truncation_sigmas**2

    def with_background(self, bg) -> "RenderSettings":
        return replace(self, background=np.asarray(bg, dtype=np.float64))


@dataclass
class Framebuffer:
    rgb: np.ndarray
    alpha: np.ndarray


@dataclass
class DeformedGaussians:
    """Render inputs produced by the deformation transfer: world means,
    world covariances, and the per-splat rotation applied to SH queries."""

    means: np.ndarray
    covariances: np.ndarray
    view_rotations: np.ndarray


@dataclass
class RenderCache:
    """Everything the backward pass replays."""

    camera: Camera
    settings: RenderSettings
    binning: TileBinning
    proj: dict
    means3d: np.ndarray
    cov3d: np.ndarray
    colors: np.ndarray
    opacities: np.ndarray
    viewdirs: np.ndarray
    viewdists: np.ndarray
    sh_basis_mask: tuple
    final_T: np.ndarray
    last_contrib: np.ndarray
    n_contrib: np.ndarray
    active_sh_degree: int


def _check_finite(name, arr):
    if len(arr) == 0:
        return
    bad = ~np.isfinite(arr.reshape(len(arr), -1)).all(axis=1)
    if bad.any():
        raise RenderError(f"non-finite {name} for gaussian {int(np.argmax(bad))}")


def cloud_render_inputs(cloud: GaussianCloud, mesh: TriangleMesh):
    """World-space means and covariances of a bound cloud."""
    means = gmod.world_positions(cloud, mesh)
    covs = gmod.covariances(cloud)
    return means, covs


def render(cloud: GaussianCloud, mesh: TriangleMesh, camera: Camera,
           settings: RenderSettings | None = None,
           deformed: DeformedGaussians | None = None,
           active_sh_degree: int | None = None,
           return_cache: bool = False):
    """Render the cloud (optionally through a deformation transfer).

    Returns a Framebuffer, or (Framebuffer, RenderCache) when return_cache is
    set (the cache feeds the analytic backward pass).
    """
    if settings is None:
        settings = RenderSettings()
    if deformed is None:
        means3d, cov3d = cloud_render_inputs(cloud, mesh)
        view_rot = None
    else:
        means3d, cov3d = deformed.means, deformed.covariances
        view_rot = deformed.view_rotations
    _check_finite("position", means3d)
    _check_finite("covariance", cov3d)
    _check_finite("sh", cloud.sh)

    degree = cloud.sh_degree if active_sh_degree is None else min(
        active_sh_degree, cloud.sh_degree)

    diff = means3d - camera.center
    dist = np.linalg.norm(diff, axis=1)
    dist = np.maximum(dist, 1e-12)
    viewdirs = diff / dist[:, None]
    sh_dirs = viewdirs
    if view_rot is not None:
        sh_dirs = np.einsum("nji,nj->ni", view_rot, viewdirs)
    colors, basis, mask = shlib.eval_sh_with_grad(cloud.sh, sh_dirs, degree)
    opacities = cloud.opacities

    proj = project_arrays(means3d, cov3d, camera, near=settings.near,
                          dilation=settings.dilation)
    binning = tile_bin(proj["means2d"], proj["radii"], proj["depths"],
                       proj["valid"], camera.width, camera.height,
                       tile_size=settings.tile_size,
                       truncation=settings.truncation_sigmas)
    proj["trunc_radii"] = np.ascontiguousarray(
        settings.truncation_sigmas * proj["radii"])
    rgb, alpha, final_T, last_contrib, n_contrib = kernels.rasterize_forward(
        camera.width, camera.height, binning,
        np.ascontiguousarray(proj["means2d"]),
        np.ascontiguousarray(proj["conics"]),
        np.ascontiguousarray(colors),
        np.ascontiguousarray(opacities),
        proj["trunc_radii"],
        settings.background, settings.power_cutoff,
        settings.term_transmittance, settings.alpha_max)
    fb = Framebuffer(rgb=rgb, alpha=alpha)
    if not return_cache:
        return fb
    cache = RenderCache(
        camera=camera, settings=settings, binning=binning, proj=proj,
        means3d=means3d, cov3d=cov3d, colors=colors, opacities=opacities,
        viewdirs=viewdirs, viewdists=dist, sh_basis_mask=(basis, mask),
        final_T=final_T, last_contrib=last_contrib, n_contrib=n_contrib,
        active_sh_degree=degree)
    return fb, cache


def render_reference(cloud: GaussianCloud, mesh: TriangleMesh, camera: Camera,
                     settings: RenderSettings | None = None,
                     deformed: DeformedGaussians | None = None,
                     active_sh_degree: int | None = None) -> Framebuffer:
    """Brute-force oracle render: identical math, no tiling."""
    if settings is None:
        settings = RenderSettings()
    if deformed is None:
        means3d, cov3d = cloud_render_inputs(cloud, mesh)
        view_rot = None
    else:
        means3d, cov3d = deformed.means, deformed.covariances
        view_rot = deformed.view_rotations
    degree = cloud.sh_degree if active_sh_degree is None else min(
        active_sh_degree, cloud.sh_degree)

    diff = means3d - camera.center
    dist = np.maximum(np.linalg.norm(diff, axis=1), 1e-12)
    viewdirs = diff / dist[:, None]
    if view_rot is not None:
        viewdirs = np.einsum("nji,nj->ni", view_rot, viewdirs)
    colors = shlib.eval_sh(cloud.sh, viewdirs, degree)

    proj = project_arrays(means3d, cov3d, camera, near=settings.near,
                          dilation=settings.dilation)
    valid = np.flatnonzero(proj["valid"])
    order = valid[np.lexsort((valid, proj["depths"][valid]))]
    rgb, alpha = composite_bruteforce(
        camera.width, camera.height, order, proj["means2d"], proj["conics"],
        colors, cloud.opacities, settings.background, settings.power_cutoff,
        settings.term_transmittance, settings.alpha_max)
    return Framebuffer(rgb=rgb, alpha=alpha)
