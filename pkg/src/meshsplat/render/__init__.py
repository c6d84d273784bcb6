"""Tile-based CPU splatting renderer.

The hot compositing loops live in a compiled extension (`._kernels`); a NumPy
implementation with identical semantics is selected at import when the
extension is missing or MESHSPLAT_PURE_PYTHON=1 is set.
"""

import os

if os.environ.get("MESHSPLAT_PURE_PYTHON"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as kernels

from .forward import (DeformedGaussians, Framebuffer, RenderCache,
                      RenderError, RenderSettings, render, render_reference)
from .projection import ProjectedGaussian, project, project_arrays
from .tiles import TileBinning, tile_bin

BACKEND = kernels.BACKEND

__all__ = [
    "BACKEND", "kernels", "render", "render_reference", "RenderSettings",
    "RenderError", "Framebuffer", "RenderCache", "DeformedGaussians",
    "project", "project_arrays", "ProjectedGaussian", "tile_bin",
    "TileBinning",
]
