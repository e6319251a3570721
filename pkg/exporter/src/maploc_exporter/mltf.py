"""Self-contained MLTF tensor codec.

Layout: 4-byte magic "MLTF", format version as u32 little-endian (currently
1), dtype code as u8, rank as u8, one u64 little-endian per dimension, then
the raw little-endian row-major payload. This module is written against the
container layout directly rather than sharing code with any reader, so a file
produced here and a file produced elsewhere can be compared byte for byte.
"""

from __future__ import annotations

import numpy as np

from .errors import MalformedTensor

MAGIC = b"MLTF"
VERSION = 1

DTYPE_OF_CODE = {
    0: np.dtype("<f4"),
    1: np.dtype("<f8"),
    2: np.dtype("u1"),
    3: np.dtype("<i4"),
    4: np.dtype("<u2"),
}
CODE_OF_DTYPE = {dt: code for code, dt in DTYPE_OF_CODE.items()}


def encode(tensor) -> bytes:
    """Serialize a numpy array into MLTF bytes."""
    arr = np.asarray(tensor)
    dt = arr.dtype.newbyteorder("<")
    if dt not in CODE_OF_DTYPE:
        raise MalformedTensor(f"dtype {arr.dtype} is not storable")
    if arr.ndim == 0 or min(arr.shape) < 1:
        raise MalformedTensor(f"shape {arr.shape} is not storable")
    arr = np.ascontiguousarray(arr, dtype=dt)
    parts = [
        MAGIC,
        VERSION.to_bytes(4, "little"),
        CODE_OF_DTYPE[dt].to_bytes(1, "little"),
        arr.ndim.to_bytes(1, "little"),
    ]
    parts.extend(int(d).to_bytes(8, "little") for d in arr.shape)
    parts.append(arr.tobytes())
    return b"".join(parts)


def decode(blob: bytes) -> np.ndarray:
    """Parse MLTF bytes back into a numpy array. Trailing bytes are ignored."""

    def take(off: int, n: int, what: str) -> tuple[bytes, int]:
        if off + n > len(blob):
            raise MalformedTensor(f"file ends inside {what}")
        return blob[off : off + n], off + n

    raw, off = take(0, 4, "magic")
    if raw != MAGIC:
        raise MalformedTensor(f"bad magic {raw!r}")
    raw, off = take(off, 4, "version")
    if int.from_bytes(raw, "little") != VERSION:
        raise MalformedTensor(f"unsupported version {int.from_bytes(raw, 'little')}")
    raw, off = take(off, 1, "dtype")
    code = raw[0]
    if code not in DTYPE_OF_CODE:
        raise MalformedTensor(f"unknown dtype code {code}")
    raw, off = take(off, 1, "rank")
    rank = raw[0]
    if rank == 0:
        raise MalformedTensor("rank 0 is not a valid shape")
    shape = []
    for i in range(rank):
        raw, off = take(off, 8, f"dimension {i}")
        shape.append(int.from_bytes(raw, "little"))
    if min(shape) < 1:
        raise MalformedTensor(f"shape {tuple(shape)} contains a zero dimension")
    dt = DTYPE_OF_CODE[code]
    count = 1
    for d in shape:
        count *= d
    raw, off = take(off, count * dt.itemsize, "payload")
    return np.frombuffer(raw, dtype=dt).reshape(shape).copy()


def save(path, tensor) -> None:
    """Write a numpy array to an MLTF file."""
    with open(path, "wb") as f:
        f.write(encode(tensor))


def load(path) -> np.ndarray:
    """Read an MLTF file into a numpy array."""
    with open(path, "rb") as f:
        return decode(f.read())
