"""Scene persistence: mesh + cloud + default camera + named handle presets,
tied together by a small JSON manifest with relative file references."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..camera import Camera
from ..gaussians import GaussianCloud, load_cloud, save_cloud
from ..mesh import TriangleMesh, load_obj


class SceneError(Exception):
    pass


@dataclass
class Scene:
    mesh: TriangleMesh
    cloud: GaussianCloud
    default_camera: Camera
    handle_presets: dict[str, dict[int, list]] = field(default_factory=dict)

    def __post_init__(self):
        self.cloud.validate_binding(self.mesh)


def save_scene(scene: Scene, path) -> None:
    base = os.path.dirname(os.path.abspath(path))
    stem = os.path.splitext(os.path.basename(path))[0]
    mesh_name = f"{stem}.obj"
    cloud_name = f"{stem}.mgsc"
    scene.mesh.save_obj(os.path.join(base, mesh_name))
    save_cloud(scene.cloud, os.path.join(base, cloud_name))
    manifest = {
        "mesh": mesh_name,
        "cloud": cloud_name,
        "camera": scene.default_camera.to_dict(),
        "handle_presets": {
            name: [{"vertex": int(v), "target": list(map(float, t))}
                   for v, t in preset.items()]
            for name, preset in scene.handle_presets.items()
        },
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)


def load_scene(path) -> Scene:
    if not os.path.exists(path):
        raise SceneError(f"scene file not found: {path}")
    with open(path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SceneError(f"malformed scene manifest: {exc}") from exc
    base = os.path.dirname(os.path.abspath(path))
    try:
        mesh = load_obj(os.path.join(base, manifest["mesh"]))
        cloud = load_cloud(os.path.join(base, manifest["cloud"]),
                           expected_mesh_hash=mesh.content_hash())
        camera = Camera.from_dict(manifest["camera"])
    except (KeyError, OSError, ValueError) as exc:
        raise SceneError(f"failed to load scene: {exc}") from exc
    presets = {
        name: {int(h["vertex"]): [float(x) for x in h["target"]]
               for h in entries}
        for name, entries in manifest.get("handle_presets", {}).items()
    }
    return Scene(mesh=mesh, cloud=cloud, default_camera=camera,
                 handle_presets=presets)


def load_handles(path) -> dict[int, np.ndarray]:
    """Handle file: JSON list of {vertex_index, target_xyz}."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list):
        raise SceneError("handle file must be a JSON list")
    handles = {}
    for entry in data:
        try:
            handles[int(entry["vertex_index"])] = np.asarray(
                entry["target_xyz"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"malformed handle entry {entry!r}") from exc
    return handles
