"""Binary matrix file format (.qlrm).

Layout, all little-endian:

    offset  size  field
    0       4     magic "QLRM"
    4       2     version, uint16 (currently 1)
    6       1     dtype, uint8 (0 = float64)
    7       1     reserved, must be 0
    8       4     rows, uint32
    12      4     cols, uint32
    16      ...   rows*cols float64 payload, row-major

Writes are atomic (temp file + rename), so interrupted runs never leave a
truncated file that parses. Round-trips are bit-exact.
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .linalg import as_matrix

MAGIC = b"QLRM"
VERSION = 1
DTYPE_FLOAT64 = 0
_HEADER = struct.Struct("<4sHBBII")


class MatrixFileError(Exception):
    """Base error for malformed matrix files."""


class BadMagicError(MatrixFileError):
    pass


class BadVersionError(MatrixFileError):
    pass


class BadDtypeError(MatrixFileError):
    pass


class TruncatedError(MatrixFileError):
    pass


class NonFinitePayloadError(MatrixFileError):
    pass


def atomic_write_bytes(path, data: bytes) -> None:
    """Write bytes to `path` via a temp file in the same directory + rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_matrix(path, m) -> None:
    """Serialize a matrix to `path`; the write is atomic and bit-exact."""
    m = as_matrix(m, "m")
    rows, cols = m.shape
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT64, 0, rows, cols)
    payload = np.ascontiguousarray(m, dtype="<f8").tobytes()
    atomic_write_bytes(path, header + payload)


def read_matrix(path) -> np.ndarray:
    """Read a matrix written by write_matrix, validating the format strictly."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedError(f"file shorter than the {_HEADER.size}-byte header")
    magic, version, dtype, reserved, rows, cols = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}, expected {VERSION}")
    if reserved != 0:
        raise BadVersionError(f"reserved byte must be 0, got {reserved}")
    if dtype != DTYPE_FLOAT64:
        raise BadDtypeError(f"unsupported dtype code {dtype}")
    if rows == 0 or cols == 0:
        raise MatrixFileError(f"dimensions must be positive, got {rows}x{cols}")
    expected = rows * cols * 8
    got = len(data) - _HEADER.size
    if got != expected:
        raise TruncatedError(f"expected {expected} payload bytes, got {got}")
    payload = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    m = payload.reshape(rows, cols).astype(np.float64, copy=True)
    if not np.all(np.isfinite(m)):
        raise NonFinitePayloadError("payload contains non-finite values")
    return m
