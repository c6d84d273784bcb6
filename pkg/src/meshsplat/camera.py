"""Pinhole camera: intrinsics plus a rigid world-to-camera pose."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.rotation = np.ascontiguousarray(self.rotation, dtype=np.float64)
        self.translation = np.ascontiguousarray(self.translation, dtype=np.float64)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-9):
            raise ValueError("world-to-camera rotation is not orthonormal")

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def pretransformed(self, Q: np.ndarray, t: np.ndarray) -> "Camera":
        """Camera observing the rigidly moved world (x' = Qx + t) the way this
        one observes the rest world: W' = W o (Q, t)^-1."""
        Q = np.asarray(Q, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        R2 = self.rotation @ Q.T
        t2 = self.translation - self.rotation @ Q.T @ t
        return Camera(self.fx, self.fy, self.cx, self.cy, self.width, self.height,
                      rotation=R2, translation=t2)

    @classmethod
    def look_at(cls, eye, target, up=(0.0, 1.0, 0.0), fx=None, fy=None,
                width=256, height=256, cx=None, cy=None):
        """Camera at `eye` looking toward `target`, +z forward, +y down in
        camera frame (OpenCV convention)."""
        eye = np.asarray(eye, dtype=np.float64)
        target = np.asarray(target, dtype=np.float64)
        forward = target - eye
        forward = forward / np.linalg.norm(forward)
        upv = np.asarray(up, dtype=np.float64)
        right = np.cross(forward, upv)
        if np.linalg.norm(right) < 1e-12:
            upv = np.array([0.0, 0.0, 1.0])
            right = np.cross(forward, upv)
        right = right / np.linalg.norm(right)
        down = np.cross(forward, right)
        R = np.stack([right, down, forward])
        t = -R @ eye
        if fx is None:
            fx = 0.9 * max(width, height)
        if fy is None:
            fy = fx
        return cls(fx=fx, fy=fy,
                   cx=width / 2 if cx is None else cx,
                   cy=height / 2 if cy is None else cy,
                   width=width, height=height, rotation=R, translation=t)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        return cls(fx=float(d["fx"]), fy=float(d["fy"]),
                   cx=float(d["cx"]), cy=float(d["cy"]),
                   width=int(d["width"]), height=int(d["height"]),
                   rotation=np.asarray(d["rotation"], dtype=np.float64),
                   translation=np.asarray(d["translation"], dtype=np.float64))


def camera_from_transform_matrix(transform_matrix, fx, fy, cx, cy, width, height):
    """Camera from a camera-to-world matrix in the synthetic-dataset
    convention (camera looks along -z, y up); converts to the +z-forward
    frame used here."""
    c2w = np.asarray(transform_matrix, dtype=np.float64).copy()
    c2w[:3, 1] *= -1.0
    c2w[:3, 2] *= -1.0
    R = c2w[:3, :3].T
    t = -R @ c2w[:3, 3]
    # Guard against mildly non-orthonormal inputs from JSON round-trips.
    u, _, vt = np.linalg.svd(R)
    R = u @ vt
    return Camera(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height,
                  rotation=R, translation=t)
