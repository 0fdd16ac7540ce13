"""Binary tensor container (CTF) and PPM image I/O.

CTF layout, all multi-byte fields little-endian:

    magic   4 bytes  b"CTF1"
    version u16      1
    dtype   u8       0=uint8, 1=int32, 2=float32, 3=float64
    ndim    u8
    dims    ndim x u64
    payload row-major array bytes

Round trips are bit-exact for every supported dtype.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CTF1"
VERSION = 1

_DTYPE_CODES: dict[int, np.dtype] = {
    0: np.dtype("<u1"),
    1: np.dtype("<i4"),
    2: np.dtype("<f4"),
    3: np.dtype("<f8"),
}
_CODE_FOR_KIND = {
    ("u", 1): 0,
    ("i", 4): 1,
    ("f", 4): 2,
    ("f", 8): 3,
}


class TensorFormatError(ValueError):
    """Raised for malformed CTF files."""


def _dtype_code(dtype: np.dtype) -> int:
    code = _CODE_FOR_KIND.get((dtype.kind, dtype.itemsize))
    if code is None:
        raise TensorFormatError(
            f"dtype {dtype} not storable; use uint8, int32, float32 or float64"
        )
    return code


def write_tensor(path: str | Path, tensor: np.ndarray) -> None:
    """Write ``tensor`` to ``path`` in CTF form."""
    arr = np.ascontiguousarray(tensor)
    code = _dtype_code(arr.dtype)
    arr = arr.astype(_DTYPE_CODES[code], copy=False)  # force little-endian
    header = MAGIC + struct.pack("<HBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.tobytes(order="C"))


def read_tensor(path: str | Path) -> np.ndarray:
    """Read a CTF file back into an array. Inverse of :func:`write_tensor`."""
    blob = Path(path).read_bytes()
    if len(blob) < 8:
        raise TensorFormatError(f"{path}: truncated header")
    if blob[:4] != MAGIC:
        raise TensorFormatError(f"{path}: bad magic {blob[:4]!r}")
    version, code, ndim = struct.unpack("<HBB", blob[4:8])
    if version != VERSION:
        raise TensorFormatError(f"{path}: unsupported version {version}")
    if code not in _DTYPE_CODES:
        raise TensorFormatError(f"{path}: unknown dtype code {code}")
    dims_end = 8 + 8 * ndim
    if len(blob) < dims_end:
        raise TensorFormatError(f"{path}: truncated dims")
    dims = struct.unpack(f"<{ndim}Q", blob[8:dims_end]) if ndim else ()
    dtype = _DTYPE_CODES[code]
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    expected = dims_end + count * dtype.itemsize
    if len(blob) != expected:
        raise TensorFormatError(
            f"{path}: payload length {len(blob) - dims_end}, expected {expected - dims_end}"
        )
    data = np.frombuffer(blob[dims_end:], dtype=dtype, count=count)
    return data.reshape(dims).copy()


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    """Write an image as binary PPM (P6, maxval 255).

    Accepts either uint8 (3, H, W) / (H, W, 3) data or float data in [0, 1]
    which is quantized with round-half-away behaviour of ``np.rint``.
    """
    img = np.asarray(image)
    if img.ndim != 3:
        raise ValueError(f"image must be 3-D, got shape {img.shape}")
    if img.shape[0] == 3:  # channel-first is the package's canonical layout
        img = np.moveaxis(img, 0, 2)
    if img.shape[2] != 3:
        raise ValueError(f"image must carry 3 color channels, got shape {img.shape}")
    if img.dtype != np.uint8:
        img = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM into a uint8 array of shape (3, H, W)."""
    blob = Path(path).read_bytes()
    if blob[:2] != b"P6":
        raise ValueError(f"{path}: not a binary PPM (P6)")
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":  # comment line
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(blob[start:pos]))
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: maxval {maxval} unsupported, expected 255")
    if len(blob) - pos < w * h * 3:
        raise ValueError(f"{path}: truncated pixel data")
    data = np.frombuffer(blob, dtype=np.uint8, count=w * h * 3, offset=pos)
    return np.moveaxis(data.reshape(h, w, 3), 2, 0).copy()
