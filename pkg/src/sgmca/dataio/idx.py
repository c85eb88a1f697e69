"""Reader and writer for the IDX array format used by the MNIST files.

Layout: two zero bytes, a type byte, a byte giving the number of
dimensions, one big-endian uint32 per dimension, then the payload in
row-major order. Gzip-compressed files are detected and inflated.
"""
from __future__ import annotations

import gzip
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "IdxError",
    "IdxMagicError",
    "IdxTruncatedError",
    "IdxDimensionError",
    "parse_idx",
    "encode_idx",
    "read_idx",
    "write_idx",
]

_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_CODES = {dt.newbyteorder("="): code for code, dt in _DTYPES.items()}


class IdxError(ValueError):
    """Base class for malformed IDX input."""


class IdxMagicError(IdxError):
    """Leading bytes are not a valid IDX magic number."""


class IdxTruncatedError(IdxError):
    """Stream ends before the header or payload is complete."""


class IdxDimensionError(IdxError):
    """Payload or dimensions disagree with the header or with expectations."""


def parse_idx(data, ndim=None):
    """Decode IDX bytes into a numpy array.

    Parameters
    ----------
    data : bytes
        Raw (uncompressed) IDX content.
    ndim : int, optional
        Required number of dimensions.

    Raises
    ------
    IdxTruncatedError, IdxMagicError, IdxDimensionError
    """
    data = bytes(data)
    if len(data) < 4:
        raise IdxTruncatedError(f"IDX header needs 4 bytes, got {len(data)}")
    zero, code, nd = struct.unpack(">HBB", data[:4])
    if zero != 0 or code not in _DTYPES:
        raise IdxMagicError(f"bad IDX magic 0x{data[:4].hex()}")
    if nd == 0:
        raise IdxDimensionError("IDX header declares zero dimensions")
    if ndim is not None and nd != ndim:
        raise IdxDimensionError(f"expected {ndim} dimensions, header declares {nd}")
    header = 4 + 4 * nd
    if len(data) < header:
        raise IdxTruncatedError(f"IDX header needs {header} bytes, got {len(data)}")
    shape = struct.unpack(f">{nd}I", data[4:header])
    dtype = _DTYPES[code]
    need = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    have = len(data) - header
    if have < need:
        raise IdxTruncatedError(f"IDX payload needs {need} bytes, got {have}")
    if have > need:
        raise IdxDimensionError(f"IDX payload has {have - need} bytes beyond the declared shape {shape}")
    arr = np.frombuffer(data, dtype=dtype, offset=header).reshape(shape)
    return arr.astype(dtype.newbyteorder("="))


def encode_idx(arr):
    """Encode a numpy array as IDX bytes."""
    arr = np.asarray(arr)
    code = _CODES.get(arr.dtype.newbyteorder("="))
    if code is None:
        raise TypeError(f"dtype {arr.dtype} has no IDX type code")
    if arr.ndim == 0 or arr.ndim > 255:
        raise IdxDimensionError(f"cannot encode an array with {arr.ndim} dimensions")
    header = struct.pack(">HBB", 0, code, arr.ndim) + struct.pack(f">{arr.ndim}I", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()


def read_idx(path, ndim=None):
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_idx(raw, ndim)


def write_idx(path, arr, compress=None):
    """Write ``arr`` to ``path``; gzip when ``compress`` is true or the name ends in ``.gz``."""
    path = Path(path)
    payload = encode_idx(arr)
    if compress or (compress is None and path.suffix == ".gz"):
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)
