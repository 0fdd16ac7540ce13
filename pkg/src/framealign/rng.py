"""Seedable, splittable random streams.

All randomness in the package flows through Philox4x64-10 counter-based
generators (``numpy.random.Philox``). A stream is addressed by a 128-bit key
built from the user seed and up to three stream ids, so independent streams
(initial latent, per-(frame, step) noise, scene textures) can be drawn in any
order and still reproduce byte-identically on every platform.
"""

from __future__ import annotations

import numpy as np

# Stream-id namespaces. Keeping them disjoint means a (seed, frame, t) noise
# stream can never collide with e.g. the scene-texture stream of the same seed.
STREAM_INIT_LATENT = 1
STREAM_STEP_NOISE = 2
STREAM_PREDICTOR = 3
STREAM_SCENE = 4

_MASK64 = (1 << 64) - 1


def _key(seed: int, stream: int, a: int = 0, b: int = 0) -> np.ndarray:
    """Pack (seed, stream, a, b) into a Philox 128-bit key."""
    lo = (seed & _MASK64) ^ ((stream & 0xFFFF) << 48)
    hi = ((a & 0xFFFFFFFF) << 32) | (b & 0xFFFFFFFF)
    return np.array([lo, hi], dtype=np.uint64)


def stream(seed: int, stream_id: int, a: int = 0, b: int = 0) -> np.random.Generator:
    """Return the generator for one addressed stream."""
    return np.random.Generator(np.random.Philox(key=_key(seed, stream_id, a, b)))


def normal_field(
    seed: int, stream_id: int, shape: tuple[int, ...], a: int = 0, b: int = 0
) -> np.ndarray:
    """Standard-normal float64 tensor drawn from the addressed stream."""
    return stream(seed, stream_id, a, b).standard_normal(shape, dtype=np.float64)
