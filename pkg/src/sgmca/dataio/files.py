"""CSV matrices and the binary ``SGM1`` model container.

CSV files hold one sample per row, comma separated, ``.`` as decimal
separator, no header. Values are written with 17 significant digits so a
save/load round trip reproduces every float64 exactly.

``SGM1`` layout (all integers uint32, all reals float64, little-endian)::

    magic           4 bytes  b"SGM1"
    m, k            2 x u32
    dims            (m+1) x u32     input dimension d_i of each map
    r_min           (m+1) x u32
    refine_iters    u32
    refine_flips    u32
    max_outer_iters u32
    rel_tol         f64
    trace_ratio     f64
    weights         m x f64
    then for i = 0..m:
        A_i         k*d_i x f64     row-major
        b_i         k x f64
        mean_i      d_i x f64
"""
from __future__ import annotations

import csv
import io
import struct
from pathlib import Path

import numpy as np

from ..sgm import LinearMap, SgmConfig, SgmModel

__all__ = [
    "CsvParseError",
    "EmptyInputError",
    "ModelFormatError",
    "load_matrix",
    "save_matrix",
    "format_matrix",
    "encode_model",
    "decode_model",
    "save_model",
    "load_model",
]

MAGIC = b"SGM1"


class CsvParseError(ValueError):
    pass


class EmptyInputError(ValueError):
    pass


class ModelFormatError(ValueError):
    pass


def load_matrix(path, expected_cols=None):
    """Read a numeric CSV file into an ``(rows, cols)`` float64 array.

    Errors name the 1-based row (and column) at fault.
    """
    text = Path(path).read_text()
    rows = []
    width = expected_cols
    for lineno, record in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not record or all(not f.strip() for f in record):
            continue
        if width is None:
            width = len(record)
        if len(record) != width:
            raise CsvParseError(f"{path}: row {lineno}: expected {width} values, got {len(record)}")
        try:
            rows.append([float(f) for f in record])
        except ValueError:
            col = next(j for j, f in enumerate(record, start=1) if not _is_float(f))
            raise CsvParseError(f"{path}: row {lineno}, column {col}: not a number: {record[col - 1]!r}") from None
    if not rows:
        raise EmptyInputError(f"{path}: no data")
    out = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        r, c = np.argwhere(~np.isfinite(out))[0]
        raise CsvParseError(f"{path}: row {r + 1}, column {c + 1}: non-finite value")
    return out


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def format_matrix(M):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    return "".join(",".join(f"{v:.17g}" for v in row) + "\n" for row in M)


def save_matrix(path, M):
    Path(path).write_text(format_matrix(M))


def encode_model(model):
    m, k = model.m, model.k
    cfg = model.config
    parts = [
        MAGIC,
        struct.pack("<2I", m, k),
        struct.pack(f"<{m + 1}I", *model.dims),
        struct.pack(f"<{m + 1}I", *model.r_min),
        struct.pack("<3I", model.refine_iters, model.refine_flips, cfg.max_outer_iters),
        struct.pack("<2d", cfg.rel_tol, model.trace_ratio),
        np.asarray(cfg.weights, dtype="<f8").tobytes(),
    ]
    for g, mu in zip(model.maps, model.means):
        parts += [
            np.ascontiguousarray(g.a, dtype="<f8").tobytes(),
            np.asarray(g.b, dtype="<f8").tobytes(),
            np.asarray(mu, dtype="<f8").tobytes(),
        ]
    return b"".join(parts)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise ModelFormatError("model file is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, count=1):
        return list(struct.unpack(f"<{count}I", self.take(4 * count)))

    def f64(self, count):
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def decode_model(data):
    rd = _Reader(bytes(data))
    if rd.take(4) != MAGIC:
        raise ModelFormatError("not an SGM1 model file")
    m, k = rd.u32(2)
    dims = rd.u32(m + 1)
    rmin = rd.u32(m + 1)
    iters, flips, max_iters = rd.u32(3)
    rel_tol, T = (float(x) for x in rd.f64(2))
    weights = rd.f64(m)
    maps, means = [], []
    for d in dims:
        a = rd.f64(k * d).reshape(k, d)
        maps.append(LinearMap(a, rd.f64(k)))
        means.append(rd.f64(d))
    if rd.pos != len(rd.data):
        raise ModelFormatError(f"{len(rd.data) - rd.pos} trailing bytes after model")
    config = SgmConfig(k=k, weights=tuple(weights), rel_tol=rel_tol, max_outer_iters=max_iters)
    return SgmModel(maps, rmin, T, iters, config, means, refine_flips=flips)


def save_model(path, model):
    Path(path).write_bytes(encode_model(model))


def load_model(path):
    return decode_model(Path(path).read_bytes())
