"""Spatial latent alignment: copy latent values along a cross-frame mapping.

Latents are (channels, height, width) float arrays. Alignment is a raw value
transfer, never an interpolation: for every mapped pair (q, s) the current
frame's site q receives, bit-exactly and across all channels, the previous
frame's value at s. Unmatched sites keep their original values.

Step windows gate when alignment runs. Windows are expressed in the
denoising-progress index p = T - t, so p = 0 is the first and noisiest step;
both bounds are inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matching import Mapping


@dataclass(frozen=True)
class StepWindow:
    """Inclusive range [lo, hi] of denoising-progress indices."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if not 0 <= self.lo <= self.hi:
            raise ValueError(f"invalid window [{self.lo}, {self.hi}]")

    def __contains__(self, progress: int) -> bool:
        return self.lo <= progress <= self.hi

    def __len__(self) -> int:
        return self.hi - self.lo + 1


def validate_latent(x: np.ndarray, name: str = "latent") -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 3 or min(x.shape) <= 0:
        raise ValueError(f"{name} must be (channels, height, width), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def align_latent(x_cur: np.ndarray, x_prev: np.ndarray, m: Mapping) -> np.ndarray:
    """Return a copy of ``x_cur`` with mapped sites overwritten from ``x_prev``.

    Output differs from ``x_cur`` only at the mapped q coordinates; the
    operation is idempotent for a fixed (x_prev, m).
    """
    x_cur = validate_latent(x_cur, "x_cur")
    x_prev = validate_latent(x_prev, "x_prev")
    if x_cur.shape != x_prev.shape:
        raise ValueError(f"latent shapes differ: {x_cur.shape} vs {x_prev.shape}")
    out = x_cur.copy()
    if len(m) == 0:
        return out
    h, w = x_cur.shape[1:]
    coords = m.pairs[:, :4]
    if (
        coords.min() < 0
        or coords[:, [0, 2]].max() >= h
        or coords[:, [1, 3]].max() >= w
    ):
        raise ValueError(f"mapping coordinates fall outside the {h}x{w} latent grid")
    out[:, m.pairs[:, 0], m.pairs[:, 1]] = x_prev[:, m.pairs[:, 2], m.pairs[:, 3]]
    return out


def should_align(progress: int, window: StepWindow | None, frame_index: int) -> bool:
    """Gate for alignment at one step: needs a predecessor frame and the
    progress index inside the window. ``frame_index`` is 1-based; ``None``
    disables the window entirely."""
    if progress < 0:
        raise ValueError(f"progress index must be >= 0, got {progress}")
    if window is None or frame_index <= 1:
        return False
    return progress in window
