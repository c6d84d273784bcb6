import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from meshsplat.camera import Camera
from meshsplat.gaussians import load_cloud
from meshsplat.mesh import icosphere
from meshsplat.optim import save_dataset
from meshsplat.render import RenderSettings, render, render_reference
from meshsplat.render.imageio import load_png, save_png
from meshsplat.service import Scene, load_scene, save_scene
from meshsplat.service.cli import main, parse_config_file

from conftest import orbit_camera, randomized_cloud, rotation_y


@pytest.fixture
def demo_scene(tmp_path, rng):
    mesh = icosphere(1)
    cloud = randomized_cloud(mesh, rng, sh_degree=1)
    cam = orbit_camera(0.4, 0.15, width=80, height=80)
    path = tmp_path / "scene.json"
    save_scene(Scene(mesh, cloud, cam), path)
    return path, mesh, cloud, cam


def test_scene_roundtrip(demo_scene):
    path, mesh, cloud, cam = demo_scene
    scene = load_scene(path)
    assert scene.mesh.n_faces == mesh.n_faces
    assert len(scene.cloud) == len(cloud)
    np.testing.assert_allclose(scene.default_camera.rotation, cam.rotation)


def test_cli_render_matches_reference_golden(demo_scene, tmp_path):
    path, mesh, cloud, cam = demo_scene
    scene = load_scene(path)
    golden = tmp_path / "golden.png"
    ref = render_reference(scene.cloud, scene.mesh, scene.default_camera,
                           RenderSettings())
    save_png(ref.rgb, golden)

    out = tmp_path / "out.png"
    result = CliRunner().invoke(main, ["render", "--scene", str(path),
                                       "--out", str(out)])
    assert result.exit_code == 0, result.output
    a = load_png(out)
    b = load_png(golden)
    rms = np.sqrt(((a - b) ** 2).mean())
    assert rms < 1e-5


def test_cli_render_empty_cloud_black(tmp_path, rng):
    mesh = icosphere(0)
    cloud = randomized_cloud(mesh, rng)
    empty = cloud.__class__(
        faces=cloud.faces[:0], bary_logits=cloud.bary_logits[:0],
        tau_logits=cloud.tau_logits[:0], log_scales=cloud.log_scales[:0],
        rotations=cloud.rotations[:0], opacity_logits=cloud.opacity_logits[:0],
        sh=cloud.sh[:0], sh_degree=cloud.sh_degree,
        bound_mesh_hash=mesh.content_hash())
    path = tmp_path / "scene.json"
    save_scene(Scene(mesh, empty, orbit_camera(0.0, width=32, height=32)),
               path)
    out = tmp_path / "out.png"
    result = CliRunner().invoke(main, ["render", "--scene", str(path),
                                       "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert np.all(load_png(out) == 0.0)


def test_cli_render_camera_behind_object(demo_scene, tmp_path):
    path, mesh, cloud, cam = demo_scene
    # camera past the object looking away: nothing visible
    away = Camera.look_at(eye=(0, 0, 4), target=(0, 0, 40), width=80,
                          height=80, fx=90)
    cam_json = tmp_path / "cam.json"
    cam_json.write_text(json.dumps(away.to_dict()))
    out = tmp_path / "away.png"
    result = CliRunner().invoke(main, ["render", "--scene", str(path),
                                       "--camera", str(cam_json),
                                       "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert load_png(out).max() == 0.0


def test_cli_render_bad_camera_json(demo_scene, tmp_path):
    path = demo_scene[0]
    bad = tmp_path / "cam.json"
    bad.write_text("{not json")
    result = CliRunner().invoke(main, ["render", "--scene", str(path),
                                       "--camera", str(bad),
                                       "--out", str(tmp_path / "x.png")])
    assert result.exit_code == 2


def test_cli_fit_missing_manifest(tmp_path):
    result = CliRunner().invoke(main, ["fit", str(tmp_path / "nope.json"),
                                       str(tmp_path / "mesh.obj"),
                                       "--out-cloud",
                                       str(tmp_path / "c.mgsc")])
    assert result.exit_code == 2
    assert "manifest not found" in result.output


def test_cli_fit_zero_iterations_writes_init(tmp_path, rng):
    from meshsplat.gaussians import init_from_mesh

    mesh = icosphere(1)
    mesh_path = tmp_path / "mesh.obj"
    mesh.save_obj(mesh_path)
    cams = [orbit_camera(a, 0.2, width=32, height=32) for a in (0.0, 1.0, 2.0)]
    cloud = randomized_cloud(mesh, rng, sh_degree=0)
    images = [render(cloud, mesh, c).rgb for c in cams]
    manifest = save_dataset(str(tmp_path / "data"), cams, images)

    out = tmp_path / "fit.mgsc"
    result = CliRunner().invoke(main, [
        "fit", manifest, str(mesh_path), "--out-cloud", str(out),
        "--iterations", "0"])
    assert result.exit_code == 0, result.output
    fitted = load_cloud(out)
    init = init_from_mesh(mesh, sh_degree=fitted.sh_degree)
    np.testing.assert_array_equal(fitted.faces, init.faces)
    np.testing.assert_allclose(fitted.log_scales,
                               init.log_scales.astype(np.float32), atol=1e-7)
    np.testing.assert_allclose(fitted.sh, init.sh, atol=0)


def test_cli_deform_identity_and_rigid(demo_scene, tmp_path):
    path, mesh, cloud, cam = demo_scene
    # identity handles: outputs equal inputs
    handles = [{"vertex_index": int(i), "target_xyz": mesh.vertices[i].tolist()}
               for i in range(0, mesh.n_vertices, 4)]
    hpath = tmp_path / "handles.json"
    hpath.write_text(json.dumps(handles))
    prefix = str(tmp_path / "ident")
    result = CliRunner().invoke(main, ["deform", "--scene", str(path),
                                       "--handles", str(hpath),
                                       "--out-prefix", prefix])
    assert result.exit_code == 0, result.output
    stats = json.loads(result.output.strip().splitlines()[-1])
    assert stats["energy"] < 1e-10

    scene = load_scene(path)
    base = render(scene.cloud, scene.mesh, scene.default_camera,
                  RenderSettings())
    out_img = load_png(prefix + ".png")
    assert np.abs(out_img - np.clip(base.rgb, 0, 1)).max() < 2.0 / 255.0

    # rigid handles covering all vertices: render equals rest render from
    # the composed camera
    Q = rotation_y(0.8)
    t = np.array([0.2, -0.1, 0.3])
    handles = [{"vertex_index": int(i),
                "target_xyz": (Q @ mesh.vertices[i] + t).tolist()}
               for i in range(mesh.n_vertices)]
    hpath.write_text(json.dumps(handles))
    prefix2 = str(tmp_path / "rigid")
    result = CliRunner().invoke(main, ["deform", "--scene", str(path),
                                       "--handles", str(hpath),
                                       "--out-prefix", prefix2])
    assert result.exit_code == 0, result.output
    moved = load_png(prefix2 + ".png")
    # oracle: deformed render viewed from the original camera equals the
    # rest cloud viewed from the pre-transformed camera
    composed = render(scene.cloud, scene.mesh,
                      scene.default_camera.pretransformed(
                          np.linalg.inv(Q), -np.linalg.inv(Q) @ t),
                      RenderSettings())
    assert np.abs(moved - np.clip(composed.rgb, 0, 1)).max() < 2.0 / 255.0

    # exports exist and load
    assert os.path.exists(prefix2 + ".obj")
    baked = load_cloud(prefix2 + ".mgsc")
    assert len(baked) == len(scene.cloud)


def test_cli_deform_unsolvable_exit3(demo_scene, tmp_path):
    path = demo_scene[0]
    hpath = tmp_path / "handles.json"
    hpath.write_text(json.dumps([]))
    result = CliRunner().invoke(main, ["deform", "--scene", str(path),
                                       "--handles", str(hpath),
                                       "--out-prefix",
                                       str(tmp_path / "x")])
    assert result.exit_code == 3


def test_config_file_parsing(tmp_path):
    cfg = tmp_path / "train.cfg"
    cfg.write_text(
        "iterations = 250   # comment\n"
        "lambda_r = 0.07\n"
        "max_sh_degree = 1\n"
        "lr_sh = 0.001\n"
        "background = black\n")
    values = parse_config_file(cfg)
    assert values == {"iterations": 250, "lambda_r": 0.07,
                      "max_sh_degree": 1, "lr_sh": 0.001,
                      "background": "black"}

    from meshsplat.optim import TrainConfig
    tc = TrainConfig.from_mapping({k: v for k, v in values.items()
                                   if k != "background"})
    assert tc.iterations == 250
    assert tc.lambda_r == 0.07
    assert tc.learning_rates["sh"] == 0.001
