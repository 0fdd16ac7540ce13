"""Array-exchange bindings for the correspondence/consistency kernels.

Only the pure kernels are exposed: dense cross-frame matching, latent
alignment, the pixel-wise guidance loss and its image-space gradient, and
the matched-pixel consistency metric, plus the CTF tensor file helpers.
Sequential frame synthesis is intentionally not bound; pipelines
orchestrate their own loops around these kernels.

Inputs are accepted through the buffer protocol (anything
``numpy.asarray`` understands). Row-major contiguous arrays of the kernel
dtype pass through zero-copy; anything else is converted with one explicit
copy and a :class:`BufferCopyWarning`. Shape or dtype violations raise
``ValueError`` / ``TypeError`` with the originating check in the message.

The functions are stateless and hold no interpreter-wide locks of their
own; numpy releases the GIL inside its kernels, so concurrent calls on
distinct inputs are safe.
"""

from __future__ import annotations

import warnings

import numpy as np

from framealign.alignment import align_latent
from framealign.embedding import EmbeddingMap
from framealign.guidance import guidance_loss as _loss
from framealign.guidance import guidance_pixel_grad as _pixel_grad
from framealign.matching import Mapping, full_mapping
from framealign.metrics import MetricReport, hmse as _hmse
from framealign.tensorio import read_tensor, write_tensor

__all__ = [
    "BufferCopyWarning",
    "MetricReport",
    "py_align_latent",
    "py_full_mapping",
    "py_guidance_loss",
    "py_guidance_pixel_grad",
    "py_hmse",
    "read_tensor",
    "write_tensor",
]


class BufferCopyWarning(UserWarning):
    """Input buffer was not row-major contiguous in the kernel dtype; one
    explicit copy was made."""


def _ingest(view, dtype, ndim: int, kind: str, name: str) -> np.ndarray:
    try:
        arr = np.asarray(view)
    except Exception as exc:  # not buffer-convertible at all
        raise TypeError(f"{name}: not an array-like buffer ({exc})") from exc
    if arr.dtype.kind not in kind:
        raise TypeError(
            f"{name}: expected {'integer' if kind == 'iu' else 'float'} data, "
            f"got dtype {arr.dtype}"
        )
    if arr.ndim != ndim:
        raise ValueError(f"{name}: expected {ndim}-D data, got shape {arr.shape}")
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out is not arr:
        warnings.warn(
            f"{name}: copied to contiguous {np.dtype(dtype).name}",
            BufferCopyWarning,
            stacklevel=3,
        )
    return out


def _embedding(labels, u, v, tag: str) -> EmbeddingMap:
    return EmbeddingMap(
        labels=_ingest(labels, np.int64, 2, "iu", f"labels_{tag}"),
        u_coords=_ingest(u, np.int64, 2, "iu", f"u_{tag}"),
        v_coords=_ingest(v, np.int64, 2, "iu", f"v_{tag}"),
    )


def _mapping(view) -> Mapping:
    return Mapping(_ingest(view, np.int64, 2, "iu", "mapping"))


def py_full_mapping(labels_i, u_i, v_i, labels_prev, u_prev, v_prev) -> np.ndarray:
    """Total-body injective pixel mapping between two embedding frames.

    Returns a fresh (k, 5) int32 array of
    (q_row, q_col, s_row, s_col, part_id) rows, identically ordered to the
    native ``match`` command's output tensor.
    """
    emb_i = _embedding(labels_i, u_i, v_i, "i")
    emb_prev = _embedding(labels_prev, u_prev, v_prev, "prev")
    if emb_i.labels.shape != emb_prev.labels.shape:
        raise ValueError(
            f"frame grids differ: {emb_i.labels.shape} vs {emb_prev.labels.shape}"
        )
    return full_mapping(emb_i, emb_prev).pairs.astype(np.int32)


def py_align_latent(x_cur, x_prev, mapping) -> np.ndarray:
    """Copy latent values along the mapping; returns a fresh buffer."""
    return align_latent(
        _ingest(x_cur, np.float64, 3, "f", "x_cur"),
        _ingest(x_prev, np.float64, 3, "f", "x_prev"),
        _mapping(mapping),
    )


def py_guidance_loss(img_cur, img_prev, mapping) -> float:
    """Summed squared channel differences over mapped pixel pairs."""
    return _loss(
        _ingest(img_cur, np.float64, 3, "f", "img_cur"),
        _ingest(img_prev, np.float64, 3, "f", "img_prev"),
        _mapping(mapping),
    )


def py_guidance_pixel_grad(img_cur, img_prev, mapping) -> np.ndarray:
    """Gradient of :func:`py_guidance_loss` in the current image."""
    return _pixel_grad(
        _ingest(img_cur, np.float64, 3, "f", "img_cur"),
        _ingest(img_prev, np.float64, 3, "f", "img_prev"),
        _mapping(mapping),
    )


def py_hmse(frames, mappings) -> MetricReport:
    """Matched-pixel mean-squared-error report over a frame sequence."""
    frame_arrays = [
        _ingest(f, np.float64, 3, "f", f"frame[{k}]") for k, f in enumerate(frames)
    ]
    mapping_objs = [_mapping(m) for m in mappings]
    return _hmse(frame_arrays, mapping_objs)
