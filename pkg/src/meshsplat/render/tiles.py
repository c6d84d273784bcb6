"""Screen-tile binning: assign each projected Gaussian to the 16x16-pixel
tiles its truncation-ellipse AABB overlaps, depth-sorted per tile."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TileBinning:
    tile_size: int
    n_tiles_x: int
    n_tiles_y: int
    # entries[starts[t]:starts[t+1]] are the Gaussian indices of tile t
    # (t = ty * n_tiles_x + tx), sorted front to back.
    starts: np.ndarray
    entries: np.ndarray

    def tile_lists(self) -> list[list[int]]:
        return [
            self.entries[self.starts[t]:self.starts[t + 1]].tolist()
            for t in range(self.n_tiles_x * self.n_tiles_y)
        ]


def tile_bin(means2d, radii, depths, valid, width, height, tile_size=16,
             truncation=3.0) -> TileBinning:
    """Bin Gaussians into tiles.

    The pixel AABB of a Gaussian is mean +- truncation * per-axis sigma,
    expanded outward to whole pixels; pixel centers sit at integer
    coordinates.  Per-tile entry lists are sorted by (depth, index) so ties
    resolve deterministically and subsets preserve the global order.
    """
    n_tiles_x = (width + tile_size - 1) // tile_size
    n_tiles_y = (height + tile_size - 1) // tile_size
    n_tiles = n_tiles_x * n_tiles_y

    idx = np.flatnonzero(valid)
    if len(idx) == 0:
        return TileBinning(tile_size, n_tiles_x, n_tiles_y,
                           np.zeros(n_tiles + 1, dtype=np.int64),
                           np.zeros(0, dtype=np.int32))

    mx, my = means2d[idx, 0], means2d[idx, 1]
    rx, ry = truncation * radii[idx, 0], truncation * radii[idx, 1]
    px0 = np.floor(mx - rx)
    px1 = np.ceil(mx + rx)
    py0 = np.floor(my - ry)
    py1 = np.ceil(my + ry)

    tx0 = np.clip(np.floor(px0 / tile_size).astype(np.int64), 0, n_tiles_x - 1)
    tx1 = np.clip(np.floor(px1 / tile_size).astype(np.int64), -1, n_tiles_x - 1)
    ty0 = np.clip(np.floor(py0 / tile_size).astype(np.int64), 0, n_tiles_y - 1)
    ty1 = np.clip(np.floor(py1 / tile_size).astype(np.int64), -1, n_tiles_y - 1)
    onscreen = (px1 >= 0) & (px0 <= width - 1) & (py1 >= 0) & (py0 <= height - 1)

    counts = np.where(onscreen, (tx1 - tx0 + 1) * (ty1 - ty0 + 1), 0)
    counts = np.maximum(counts, 0)
    total = int(counts.sum())
    if total == 0:
        return TileBinning(tile_size, n_tiles_x, n_tiles_y,
                           np.zeros(n_tiles + 1, dtype=np.int64),
                           np.zeros(0, dtype=np.int32))

    # Expand (gaussian, covered-tile) pairs.
    rep = np.repeat(np.arange(len(idx)), counts)
    offsets = np.concatenate([[0], np.cumsum(counts)])[:-1]
    local = np.arange(total) - np.repeat(offsets, counts)
    span_x = (tx1 - tx0 + 1)
    tx = tx0[rep] + local % span_x[rep]
    ty = ty0[rep] + local // span_x[rep]
    tile_ids = ty * n_tiles_x + tx

    gauss = idx[rep]
    order = np.lexsort((gauss, depths[gauss], tile_ids))
    tile_sorted = tile_ids[order]
    entries = gauss[order].astype(np.int32)
    starts = np.searchsorted(tile_sorted, np.arange(n_tiles + 1)).astype(np.int64)
    return TileBinning(tile_size, n_tiles_x, n_tiles_y, starts, entries)
