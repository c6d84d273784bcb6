"""Calibrated multi-view dataset ingestion.

Manifests follow the synthetic-scenes transforms convention: a JSON file
with either `camera_angle_x` or explicit `fl_x`/`fl_y` (plus optional
`cx`/`cy`/`w`/`h`), and `frames[]` each holding a `file_path` and a 4x4
`transform_matrix` (camera-to-world).  Images are PNG; RGBA images are
composited over the dataset background color.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..camera import Camera, camera_from_transform_matrix
from ..render.imageio import load_png


@dataclass
class Dataset:
    views: list[tuple[Camera, np.ndarray]]
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __len__(self) -> int:
        return len(self.views)

    def resolution(self) -> tuple[int, int]:
        cam = self.views[0][0]
        return cam.width, cam.height


def _resolve_image(base_dir: str, file_path: str) -> str:
    path = os.path.join(base_dir, file_path)
    if not os.path.splitext(path)[1]:
        path += ".png"
    return path


def load_dataset(manifest_path: str, background=(0.0, 0.0, 0.0)) -> Dataset:
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    base_dir = os.path.dirname(os.path.abspath(manifest_path))
    background = np.asarray(background, dtype=np.float64)

    frames = manifest["frames"]
    if not frames:
        raise ValueError("manifest has no frames")

    views = []
    for frame in frames:
        img = load_png(_resolve_image(base_dir, frame["file_path"]))
        h, w = img.shape[:2]
        if img.shape[2] == 4:
            alpha = img[:, :, 3:4]
            img = img[:, :, :3] * alpha + background[None, None, :] * (1.0 - alpha)
        if "fl_x" in manifest:
            fx = float(manifest["fl_x"])
            fy = float(manifest.get("fl_y", fx))
        elif "camera_angle_x" in manifest:
            fx = 0.5 * w / math.tan(0.5 * float(manifest["camera_angle_x"]))
            fy = fx
        else:
            raise ValueError("manifest lacks camera_angle_x or fl_x")
        cx = float(manifest.get("cx", w / 2.0))
        cy = float(manifest.get("cy", h / 2.0))
        cam = camera_from_transform_matrix(frame["transform_matrix"],
                                           fx=fx, fy=fy, cx=cx, cy=cy,
                                           width=w, height=h)
        views.append((cam, np.ascontiguousarray(img)))

    first = views[0][1].shape
    for cam, img in views:
        if img.shape != first:
            raise ValueError("dataset images differ in size")
    return Dataset(views=views, background=background)


def save_dataset(dirname: str, cameras: list[Camera], images: list[np.ndarray],
                 manifest_name: str = "transforms.json") -> str:
    """Write images plus a transforms manifest; used by the self-consistency
    fixtures and the demo tooling."""
    from ..render.imageio import save_png

    os.makedirs(dirname, exist_ok=True)
    frames = []
    for i, (cam, img) in enumerate(zip(cameras, images)):
        name = f"r_{i}.png"
        save_png(img, os.path.join(dirname, name))
        c2w = np.eye(4)
        R = cam.rotation.copy()
        t = cam.translation.copy()
        Rc = R.T
        center = -Rc @ t
        c2w[:3, :3] = Rc
        c2w[:3, 1] *= -1.0
        c2w[:3, 2] *= -1.0
        c2w[:3, 3] = center
        frames.append({"file_path": name, "transform_matrix": c2w.tolist()})
    cam0 = cameras[0]
    manifest = {
        "fl_x": cam0.fx, "fl_y": cam0.fy, "cx": cam0.cx, "cy": cam0.cy,
        "frames": frames,
    }
    path = os.path.join(dirname, manifest_name)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
    return path
