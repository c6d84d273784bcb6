"""Command-line entry points: fit, render, deform, serve.

Exit codes: 0 ok, 2 input error, 3 solve error.  A key=value config file
mirrors the training and solver knobs; explicit CLI flags win over it.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from ..camera import Camera
from ..deform import SolveError, arap_solve, bake_cloud, transfer
from ..gaussians import save_cloud
from ..mesh import MeshError, load_obj
from ..optim import (TrainConfig, load_dataset, train, write_metrics_csv)
from ..render import RenderSettings, render
from ..render.imageio import save_png
from .scene import SceneError, load_handles, load_scene
from .server import serve as run_server

EXIT_INPUT = 2
EXIT_SOLVE = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def parse_config_file(path) -> dict:
    """key=value config lines; '#' comments; bools/ints/floats coerced."""
    values: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value")
            key, _, val = line.partition("=")
            values[key.strip()] = _coerce(val.strip().strip('"'))
    return values


def _coerce(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _parse_flags(flag_options) -> dict:
    flags = {}
    for item in flag_options:
        key, _, val = item.partition("=")
        if not val:
            raise click.BadParameter(f"--flag expects name=value, got {item!r}")
        flags[key.strip()] = _coerce(val.strip())
    return flags


@click.group()
def main():
    """Mesh-bound Gaussian splatting tools."""


@main.command()
@click.argument("dataset_manifest", type=click.Path())
@click.argument("mesh_path", type=click.Path())
@click.option("--out-cloud", required=True, type=click.Path())
@click.option("--metrics-csv", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--iterations", type=int, default=None)
@click.option("--seed", type=int, default=None)
def fit(dataset_manifest, mesh_path, out_cloud, metrics_csv, config_path,
        iterations, seed):
    """Fit a bound Gaussian cloud to a calibrated image set."""
    if not os.path.exists(dataset_manifest):
        _fail(EXIT_INPUT, f"manifest not found: {dataset_manifest}")
    if not os.path.exists(mesh_path):
        _fail(EXIT_INPUT, f"mesh not found: {mesh_path}")
    cfg_map = {}
    if config_path:
        if not os.path.exists(config_path):
            _fail(EXIT_INPUT, f"config not found: {config_path}")
        cfg_map = parse_config_file(config_path)
    if iterations is not None:
        cfg_map["iterations"] = iterations
    if seed is not None:
        cfg_map["seed"] = seed
    config = TrainConfig.from_mapping(cfg_map)
    try:
        mesh = load_obj(mesh_path)
        dataset = load_dataset(dataset_manifest, background=config.background)
    except (MeshError, ValueError, OSError) as exc:
        _fail(EXIT_INPUT, str(exc))

    def progress(row):
        click.echo(f"iter {row['iteration']:6d}  loss {row['loss']:.5f}  "
                   f"psnr {row['psnr']:.2f}  gaussians {row['gaussian_count']}")

    result = train(dataset, mesh, config, progress=progress)
    save_cloud(result.cloud, out_cloud)
    mesh_out = os.path.splitext(out_cloud)[0] + ".obj"
    result.mesh.save_obj(mesh_out)
    if metrics_csv:
        write_metrics_csv(result.metrics, metrics_csv)
    click.echo(f"final holdout psnr: {result.final_psnr():.2f} dB")


def _load_scene_arg(scene_path):
    if not scene_path or not os.path.exists(scene_path):
        _fail(EXIT_INPUT, f"scene not found: {scene_path}")
    try:
        return load_scene(scene_path)
    except SceneError as exc:
        _fail(EXIT_INPUT, str(exc))


@main.command("render")
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.option("--camera", "camera_json", type=click.Path(), default=None,
              help="JSON camera override (default: scene camera)")
@click.option("--out", "out_png", required=True, type=click.Path())
@click.option("--background", default="0,0,0")
def render_cmd(scene_path, camera_json, out_png, background):
    """Render a scene to PNG from its default or an explicit camera."""
    scene = _load_scene_arg(scene_path)
    camera = scene.default_camera
    if camera_json:
        if not os.path.exists(camera_json):
            _fail(EXIT_INPUT, f"camera file not found: {camera_json}")
        try:
            with open(camera_json) as fh:
                camera = Camera.from_dict(json.load(fh))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            _fail(EXIT_INPUT, f"bad camera JSON: {exc}")
    try:
        bg = np.asarray([float(x) for x in background.split(",")])
    except ValueError:
        _fail(EXIT_INPUT, f"bad background {background!r}")
    fb = render(scene.cloud, scene.mesh, camera,
                RenderSettings(background=bg))
    save_png(fb.rgb, out_png)
    click.echo(f"wrote {out_png}")


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.option("--handles", "handles_json", required=True, type=click.Path())
@click.option("--out-prefix", required=True)
@click.option("--flag", "flag_options", multiple=True,
              help="name=value, e.g. rotate-normal-offset=false")
@click.option("--max-iters", type=int, default=20)
def deform(scene_path, handles_json, out_prefix, flag_options, max_iters):
    """Solve handles, transfer to the cloud, export OBJ + cloud + PNG."""
    scene = _load_scene_arg(scene_path)
    if not os.path.exists(handles_json):
        _fail(EXIT_INPUT, f"handles file not found: {handles_json}")
    try:
        handles = load_handles(handles_json)
        flags = _parse_flags(flag_options)
    except (SceneError, click.BadParameter) as exc:
        _fail(EXIT_INPUT, str(exc))
    rotate_offset = bool(flags.get("rotate-normal-offset", True))
    try:
        state = arap_solve(scene.mesh, handles, max_iters=max_iters)
    except SolveError as exc:
        _fail(EXIT_SOLVE, str(exc))

    deformed_mesh = scene.mesh.copy()
    deformed_mesh.vertices = state.deformed_vertices.copy()
    deformed_mesh.save_obj(out_prefix + ".obj")
    baked = bake_cloud(scene.cloud, scene.mesh, state, deformed_mesh,
                       rotate_normal_offset=rotate_offset)
    save_cloud(baked, out_prefix + ".mgsc")
    deformed = transfer(scene.cloud, scene.mesh, state,
                        rotate_normal_offset=rotate_offset)
    fb = render(scene.cloud, scene.mesh, scene.default_camera,
                RenderSettings(), deformed=deformed)
    save_png(fb.rgb, out_prefix + ".png")
    stats = {"energy": state.energy, "iterations": state.iterations,
             "vertices": scene.mesh.n_vertices, "gaussians": len(scene.cloud)}
    click.echo(json.dumps(stats))


@main.command()
@click.option("--scene", "scene_path", required=True, type=click.Path())
@click.option("--bind", default="127.0.0.1:8000")
@click.option("--flag", "flag_options", multiple=True)
@click.option("--interactive-iters", type=int, default=4)
@click.option("--static-dir", type=click.Path(), default=None)
def serve(scene_path, bind, flag_options, interactive_iters, static_dir):
    """Run the interactive session server."""
    if not os.path.exists(scene_path):
        _fail(EXIT_INPUT, f"scene not found: {scene_path}")
    flags = _parse_flags(flag_options)
    if static_dir is None:
        bundled = os.path.join(os.path.dirname(__file__), "..", "..", "..",
                               "frontend", "dist")
        static_dir = bundled if os.path.isdir(bundled) else None
    run_server(scene_path, bind=bind, static_dir=static_dir,
               interactive_iters=interactive_iters,
               rotate_normal_offset=bool(
                   flags.get("rotate-normal-offset", True)))


if __name__ == "__main__":
    main()
