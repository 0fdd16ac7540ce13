"""Temporal-consistency metric over matched character pixels.

For every consecutive frame pair the squared pixel difference is averaged
over the mapped pairs and the three color channels, with pixel values scaled
to the 0..255 range first. The headline number is the mean over the N - 1
consecutive pairs, so lower means steadier characters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .guidance import validate_image
from .matching import Mapping


@dataclass(frozen=True)
class MetricReport:
    """h_mse plus its per-pair breakdown (later-frame index, pairs, mse)."""

    h_mse: float
    per_pair: tuple[tuple[int, int, float], ...]


def hmse(frames: list[np.ndarray], mappings: list[Mapping]) -> MetricReport:
    """Mean squared matched-pixel difference across consecutive frames.

    ``mappings[k]`` relates ``frames[k + 1]`` (its q side) to ``frames[k]``
    (its s side) and must be non-empty; frame values are in [0, 1] and are
    scaled by 255 before squaring.
    """
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    if len(mappings) != len(frames) - 1:
        raise ValueError(
            f"need {len(frames) - 1} mappings for {len(frames)} frames, "
            f"got {len(mappings)}"
        )
    per_pair = []
    for k, m in enumerate(mappings):
        if len(m) == 0:
            raise ValueError(f"mapping {k} is empty; per-pair mean undefined")
        cur = validate_image(frames[k + 1], f"frame {k + 1}")
        prev = validate_image(frames[k], f"frame {k}")
        if cur.shape != prev.shape:
            raise ValueError(
                f"frame shapes differ: {cur.shape} vs {prev.shape} at pair {k}"
            )
        h, w = cur.shape[1:]
        coords = m.pairs[:, :4]
        if (
            coords.min() < 0
            or coords[:, [0, 2]].max() >= h
            or coords[:, [1, 3]].max() >= w
        ):
            raise ValueError(f"mapping {k} coordinates outside the {h}x{w} frame")
        p = m.pairs
        diff = 255.0 * cur[:, p[:, 0], p[:, 1]] - 255.0 * prev[:, p[:, 2], p[:, 3]]
        per_pair.append((k + 1, len(m), float(np.mean(diff * diff))))
    value = float(np.mean([mse for _, _, mse in per_pair]))
    return MetricReport(h_mse=value, per_pair=tuple(per_pair))
