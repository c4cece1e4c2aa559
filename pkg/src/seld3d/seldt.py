"""SELDT binary tensor container.

A minimal, endian-pinned format used for every tensor the toolkit writes
(feature maps, multi-ACCDOA targets, predictions, checkpoint blobs):

    bytes 0..7   magic ``SELDT1\\0\\0``
    u32 LE       ndim
    ndim x u64   dims (LE)
    payload      row-major float32, little-endian
"""

from __future__ import annotations

import io
import struct

import numpy as np

MAGIC = b"SELDT1\x00\x00"


class SeldtFormatError(ValueError):
    """Raised when a stream does not contain a valid SELDT tensor."""


def write_seldt(path_or_file, array) -> None:
    """Serialize ``array`` (any real dtype, cast to float32) as SELDT."""
    arr = np.ascontiguousarray(array, dtype="<f4")
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    if hasattr(path_or_file, "write"):
        path_or_file.write(header)
        path_or_file.write(arr.tobytes())
    else:
        with open(path_or_file, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes())


def read_seldt(path_or_file) -> np.ndarray:
    """Read a SELDT tensor, returning a float32 ndarray."""
    if hasattr(path_or_file, "read"):
        return _read_stream(path_or_file)
    with open(path_or_file, "rb") as fh:
        return _read_stream(fh)


def _read_stream(fh) -> np.ndarray:
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise SeldtFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    (ndim,) = struct.unpack("<I", _read_exact(fh, 4))
    if ndim > 32:
        raise SeldtFormatError(f"implausible ndim {ndim}")
    dims = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim))
    count = int(np.prod(dims)) if ndim else 1
    payload = _read_exact(fh, 4 * count)
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise SeldtFormatError(f"truncated stream: wanted {n} bytes, got {len(buf)}")
    return buf


def dumps(array) -> bytes:
    buf = io.BytesIO()
    write_seldt(buf, array)
    return buf.getvalue()


def loads(blob: bytes) -> np.ndarray:
    return read_seldt(io.BytesIO(blob))
