"""Correspondence visualization.

Renders a two-pane PPM: the left pane colors every matched pixel of the
current frame by a deterministic hash of its own coordinate, the right pane
colors each matched pixel of the previous frame with its partner's color.
Unmatched pixels stay black, so holes in the correspondence show up
directly and a rigid motion appears as a translated copy of the left pane.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .embedding import EmbeddingMap
from .matching import Mapping
from .tensorio import write_ppm


def coordinate_colors(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Deterministic (n, 3) uint8 colors, each channel in [32, 255] so that
    colored pixels can never be mistaken for the black unmatched state."""
    x = (rows.astype(np.uint64) << np.uint64(32)) | cols.astype(np.uint64)
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xFF51AFD7ED558CCD)
    x ^= x >> np.uint64(33)
    x *= np.uint64(0xC4CEB9FE1A85EC53)
    x ^= x >> np.uint64(33)
    rgb = np.stack(
        [
            (x & np.uint64(0xFF)).astype(np.uint64),
            ((x >> np.uint64(8)) & np.uint64(0xFF)).astype(np.uint64),
            ((x >> np.uint64(16)) & np.uint64(0xFF)).astype(np.uint64),
        ],
        axis=1,
    )
    return (32 + (rgb * 223) // 255).astype(np.uint8)


def mapping_panes(
    emb_i: EmbeddingMap, emb_prev: EmbeddingMap, m: Mapping
) -> tuple[np.ndarray, np.ndarray]:
    """The two (H, W, 3) uint8 panes, current frame first."""
    h, w = emb_i.labels.shape
    if emb_prev.labels.shape != (h, w):
        raise ValueError("frame grids differ")
    if len(m):
        coords = m.pairs[:, :4]
        if (
            coords.min() < 0
            or coords[:, [0, 2]].max() >= h
            or coords[:, [1, 3]].max() >= w
        ):
            raise ValueError(f"mapping coordinates outside the {h}x{w} grid")
    cur = np.zeros((h, w, 3), dtype=np.uint8)
    prev = np.zeros((h, w, 3), dtype=np.uint8)
    if len(m):
        colors = coordinate_colors(m.pairs[:, 0], m.pairs[:, 1])
        cur[m.pairs[:, 0], m.pairs[:, 1]] = colors
        prev[m.pairs[:, 2], m.pairs[:, 3]] = colors
    return cur, prev


def viz_mapping(
    emb_i: EmbeddingMap, emb_prev: EmbeddingMap, m: Mapping, out: str | Path
) -> Path:
    """Write the side-by-side pane pair (current | previous) as one PPM."""
    cur, prev = mapping_panes(emb_i, emb_prev, m)
    write_ppm(out, np.concatenate([cur, prev], axis=1))
    return Path(out)
