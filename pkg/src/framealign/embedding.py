"""Body-surface embedding maps and per-part feature matrices.

An :class:`EmbeddingMap` stores, per pixel, a body-part label (0..24 with
0 = background) and integer UV surface coordinates (0..255). Feature matrices
stack ``[U, V, E]`` per pixel of one part, where ``E`` is the Euclidean
distance to the part centroid in pixel units; ``E`` rewards spatially close
matches when two frames are compared.

UV values are treated as per-part chart coordinates: they are only ever
compared between pixels carrying the same part label.

All functions here are pure and safe for concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_PARTS = 24
BACKGROUND = 0


@dataclass(frozen=True)
class EmbeddingMap:
    """Per-pixel part labels and UV coordinates on one frame's grid."""

    labels: np.ndarray
    u_coords: np.ndarray
    v_coords: np.ndarray

    def __post_init__(self) -> None:
        lab, u, v = self.labels, self.u_coords, self.v_coords
        for name, g in (("labels", lab), ("u_coords", u), ("v_coords", v)):
            if g.ndim != 2:
                raise ValueError(f"{name} must be 2-D, got shape {g.shape}")
            if not np.issubdtype(g.dtype, np.integer):
                raise ValueError(f"{name} must be integer typed, got {g.dtype}")
        if not (lab.shape == u.shape == v.shape):
            raise ValueError(
                f"channel shapes differ: {lab.shape}, {u.shape}, {v.shape}"
            )
        if lab.size:
            if lab.min() < 0 or lab.max() > N_PARTS:
                raise ValueError("labels must lie in [0, 24]")
            for name, g in (("u_coords", u), ("v_coords", v)):
                if g.min() < 0 or g.max() > 255:
                    raise ValueError(f"{name} values must lie in [0, 255]")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class PartPixelSet:
    """Raster-ordered pixel coordinates of one body part in one frame."""

    part_id: int
    pixels: np.ndarray  # (n, 2) int rows of (row, col), raster order

    def __len__(self) -> int:
        return int(self.pixels.shape[0])


def part_pixels(emb: EmbeddingMap, j: int) -> PartPixelSet:
    """Pixels of part ``j`` in raster (row-major) order. ``j`` in 1..24."""
    if not 1 <= j <= N_PARTS:
        raise ValueError(f"part id must be in [1, 24], got {j}")
    coords = np.argwhere(emb.labels == j)  # argwhere scans row-major
    return PartPixelSet(part_id=j, pixels=coords.astype(np.int64))


def centroid(part: PartPixelSet) -> tuple[float, float]:
    """Arithmetic mean of the part's pixel coordinates as (row, col)."""
    if len(part) == 0:
        raise ValueError(f"part {part.part_id} has no pixels; centroid undefined")
    mean = part.pixels.mean(axis=0)
    return float(mean[0]), float(mean[1])


def feature_matrix(emb: EmbeddingMap, part: PartPixelSet) -> np.ndarray:
    """Per-pixel feature rows ``[U, V, E]`` for one part.

    ``E`` is the distance from the pixel to the part centroid. Row order
    matches ``part.pixels``. Features stay at raw scale (UV in 0..255,
    E in pixels); no normalization is applied.
    """
    if len(part) == 0:
        raise ValueError(f"part {part.part_id} is empty; no feature rows")
    rows = part.pixels[:, 0]
    cols = part.pixels[:, 1]
    cr, cc = centroid(part)
    e = np.hypot(rows - cr, cols - cc)
    feats = np.empty((len(part), 3), dtype=np.float64)
    feats[:, 0] = emb.u_coords[rows, cols]
    feats[:, 1] = emb.v_coords[rows, cols]
    feats[:, 2] = e
    return feats


def _nearest_indices(n_src: int, n_dst: int) -> np.ndarray:
    # source coordinate of output-pixel centers: floor((i + 0.5) * src / dst)
    idx = np.floor((np.arange(n_dst) + 0.5) * (n_src / n_dst)).astype(np.int64)
    return np.clip(idx, 0, n_src - 1)


def downsample(emb: EmbeddingMap, out_w: int, out_h: int) -> EmbeddingMap:
    """Nearest-neighbor resampling of all three channels.

    Labels cannot be averaged, so a single deterministic source pixel is
    sampled per output pixel for every channel alike.
    """
    if out_w <= 0 or out_h <= 0:
        raise ValueError(f"output dims must be positive, got {out_w}x{out_h}")
    if out_w > emb.width or out_h > emb.height:
        raise ValueError(
            f"output {out_w}x{out_h} exceeds source {emb.width}x{emb.height}"
        )
    ri = _nearest_indices(emb.height, out_h)
    ci = _nearest_indices(emb.width, out_w)
    return EmbeddingMap(
        labels=emb.labels[np.ix_(ri, ci)].copy(),
        u_coords=emb.u_coords[np.ix_(ri, ci)].copy(),
        v_coords=emb.v_coords[np.ix_(ri, ci)].copy(),
    )
