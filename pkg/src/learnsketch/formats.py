"""Matrix files.

Binary layout (all little-endian)::

    b"LSKM"  u8 version=1  u64 rows  u64 cols  f64[rows*cols] row-major

CSV files (comma separated, no header) can be imported with :func:`read_csv`.
"""

import struct

import numpy as np

from .matlin import InvalidInputError, as_matrix

MAGIC = b"LSKM"
VERSION = 1
_HEADER = struct.Struct("<4sBQQ")


def write_matrix(path, A):
    A = as_matrix(A)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, A.shape[0], A.shape[1]))
        fh.write(np.ascontiguousarray(A, dtype="<f8").tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise InvalidInputError(f"{path}: truncated header")
        magic, version, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise InvalidInputError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise InvalidInputError(f"{path}: unsupported version {version}")
        payload = fh.read()
    if len(payload) != 8 * rows * cols:
        raise InvalidInputError(f"{path}: expected {rows * cols} values, got {len(payload) // 8}")
    A = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(rows, cols)
    return as_matrix(A, str(path))


def read_csv(path):
    A = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return as_matrix(A, str(path))


def load_any(path):
    """Read an LSKM file, or a CSV file when the name ends in .csv."""
    return read_csv(path) if str(path).lower().endswith(".csv") else read_matrix(path)
