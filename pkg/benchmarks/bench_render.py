#!/usr/bin/env python3
"""Benchmark the compiled rasterization kernels against the NumPy fallback.

Runs the forward and backward kernels on identical scenes through both
backends and reports timings plus the end-to-end interactive loop rate.

    python3 benchmarks/bench_render.py [--sizes 128,256] [--splats 2500,10240]
"""

import argparse
import time

import numpy as np

from meshsplat import sh as shlib
from meshsplat.gaussians import GaussianCloud, covariances, init_from_mesh, \
    world_positions
from meshsplat.mesh import icosphere
from meshsplat.render import RenderSettings, _kernels_py
from meshsplat.render.projection import project_arrays
from meshsplat.render.tiles import tile_bin

try:
    from meshsplat.render import _kernels as kernels_cy
except ImportError:
    kernels_cy = None


def make_scene(n_splats, size, seed=0):
    rng = np.random.default_rng(seed)
    subdiv = 4 if n_splats > 6000 else 3
    mesh = icosphere(subdiv)
    base = init_from_mesh(mesh, sh_degree=0)
    base.sh[:, 0, :] = rng.normal(0, 0.25, (len(base), 3))
    base.opacity_logits[:] = 1.5
    parts = [base]
    while sum(len(p) for p in parts) < n_splats:
        extra = base.copy()
        extra.tau_logits[:] = rng.normal(0, 0.5, len(extra))
        parts.append(extra)
    cloud = GaussianCloud(
        faces=np.concatenate([p.faces for p in parts])[:n_splats],
        bary_logits=np.concatenate([p.bary_logits for p in parts])[:n_splats],
        tau_logits=np.concatenate([p.tau_logits for p in parts])[:n_splats],
        log_scales=np.concatenate([p.log_scales for p in parts])[:n_splats],
        rotations=np.concatenate([p.rotations for p in parts])[:n_splats],
        opacity_logits=np.concatenate(
            [p.opacity_logits for p in parts])[:n_splats],
        sh=np.concatenate([p.sh for p in parts])[:n_splats],
        sh_degree=0, bound_mesh_hash=mesh.content_hash())

    from meshsplat.camera import Camera
    cam = Camera.look_at(eye=(1.2, 0.8, -3.0), target=(0, 0, 0),
                         width=size, height=size, fx=1.1 * size)
    settings = RenderSettings()
    means = world_positions(cloud, mesh)
    covs = covariances(cloud)
    proj = project_arrays(means, covs, cam)
    dirs = means - cam.center
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    colors = shlib.eval_sh(cloud.sh, dirs, 0)
    binning = tile_bin(proj["means2d"], proj["radii"], proj["depths"],
                       proj["valid"], size, size)
    args = dict(
        width=size, height=size, binning=binning,
        means2d=np.ascontiguousarray(proj["means2d"]),
        conics=np.ascontiguousarray(proj["conics"]),
        colors=np.ascontiguousarray(colors),
        opacities=np.ascontiguousarray(cloud.opacities),
        trunc_radii=np.ascontiguousarray(
            settings.truncation_sigmas * proj["radii"]),
        background=settings.background,
        power_cutoff=settings.power_cutoff,
        term=settings.term_transmittance,
        alpha_max=settings.alpha_max)
    return args


def run_forward(kernels, a):
    return kernels.rasterize_forward(
        a["width"], a["height"], a["binning"], a["means2d"], a["conics"],
        a["colors"], a["opacities"], a["trunc_radii"], a["background"],
        a["power_cutoff"], a["term"], a["alpha_max"])


def run_backward(kernels, a, fwd):
    _, _, final_T, last, _ = fwd
    dL = np.full((a["height"], a["width"], 3), 1e-4)
    return kernels.rasterize_backward(
        a["width"], a["height"], a["binning"], a["means2d"], a["conics"],
        a["colors"], a["opacities"], a["trunc_radii"], a["background"],
        a["power_cutoff"], a["alpha_max"], final_T, last, dL)


def bench(fn, repeats=5):
    fn()
    t0 = time.perf_counter()
    for _ in range(repeats):
        out = fn()
    return 1e3 * (time.perf_counter() - t0) / repeats, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="128,256")
    parser.add_argument("--splats", default="2560,10240")
    parser.add_argument("--repeats", type=int, default=5)
    opts = parser.parse_args()

    backends = [("python", _kernels_py)]
    if kernels_cy is not None:
        backends.insert(0, ("cython", kernels_cy))
    else:
        print("compiled extension unavailable; benchmarking fallback only")

    print(f"{'scene':>22} {'backend':>8} {'forward':>10} {'backward':>10}")
    for size in (int(s) for s in opts.sizes.split(",")):
        for n in (int(s) for s in opts.splats.split(",")):
            a = make_scene(n, size)
            results = {}
            for name, kern in backends:
                t_fwd, fwd = bench(lambda: run_forward(kern, a),
                                   opts.repeats)
                t_bwd, bwd = bench(lambda: run_backward(kern, a, fwd),
                                   opts.repeats)
                results[name] = (t_fwd, t_bwd, fwd, bwd)
                print(f"{size:>4}px {n:>7} splats {name:>8} "
                      f"{t_fwd:>8.1f}ms {t_bwd:>8.1f}ms")
            if len(results) == 2:
                c, p = results["cython"], results["python"]
                dev = max(np.abs(c[2][0] - p[2][0]).max(),
                          max(np.abs(x - y).max()
                              for x, y in zip(c[3], p[3])))
                print(f"{'':>22} speedup  {p[0] / c[0]:>7.1f}x "
                      f"{p[1] / c[1]:>8.1f}x   (max deviation {dev:.2e})")


if __name__ == "__main__":
    main()
