"""Image I/O for framebuffers: 8-bit PNG via Pillow and binary PPM (P6)."""

from __future__ import annotations

import numpy as np
from PIL import Image


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.clip(rgb, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)


def save_png(rgb: np.ndarray, path):
    Image.fromarray(to_uint8(rgb), mode="RGB").save(path, format="PNG")


def load_png(path) -> np.ndarray:
    """Load a PNG as float RGB(A) in [0, 1]; keeps alpha when present."""
    img = Image.open(path)
    if img.mode not in ("RGB", "RGBA"):
        img = img.convert("RGBA" if "A" in img.mode else "RGB")
    return np.asarray(img, dtype=np.float64) / 255.0


def save_ppm(rgb: np.ndarray, path):
    data = to_uint8(rgb)
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def load_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P6":
            raise ValueError(f"not a P6 PPM: {magic!r}")
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        maxval = int(fh.readline())
        data = np.frombuffer(fh.read(w * h * 3), dtype=np.uint8)
    return data.reshape(h, w, 3).astype(np.float64) / maxval
