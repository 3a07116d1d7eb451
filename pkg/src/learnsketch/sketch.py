"""CountSketch representation, sparse application, stacking and JSON files.

A CountSketch ``CS(p, v)`` is an m x n matrix with a single nonzero per column:
column ``i`` holds ``v[i]`` in row ``p[i]``.  Bin indices are 0-based in memory
and 1-based in sketch files.

Sketch file format (UTF-8 JSON)::

    {"m": 4, "n": 6, "p": [1, 3, 2, 1, 4, 4], "v": [1.0, -1.0, ...]}
    {"parts": [<sketch>, <sketch>, ...]}            # StackedSketch
    {"dense": [[...], ...]}                         # dense sketch matrix
"""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .matlin import InvalidInputError, as_matrix


@dataclass(frozen=True, eq=False)
class CountSketch:
    m: int
    n: int
    p: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=np.int64).ravel()
        v = np.array(self.v, dtype=np.float64).ravel()
        if self.m < 1 or self.n < 1:
            raise InvalidInputError(f"sketch dims must be positive, got m={self.m}, n={self.n}")
        if p.shape[0] != self.n or v.shape[0] != self.n:
            raise InvalidInputError(
                f"p and v must have length n={self.n}, got {p.shape[0]} and {v.shape[0]}")
        if p.size and (p.min() < 0 or p.max() >= self.m):
            raise InvalidInputError(f"bin index outside [0, {self.m})")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("sketch values must be finite")
        p.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "v", v)

    @property
    def rows(self):
        return self.m

    @property
    def is_classical(self):
        return bool(np.all(np.abs(self.v) == 1.0))

    def __eq__(self, other):
        if not isinstance(other, CountSketch):
            return NotImplemented
        return (self.m == other.m and self.n == other.n
                and np.array_equal(self.p, other.p) and np.array_equal(self.v, other.v))

    def __repr__(self):
        return f"CountSketch(m={self.m}, n={self.n})"


@dataclass(frozen=True, eq=False)
class StackedSketch:
    """Vertical concatenation of sketches sharing the column count n."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise InvalidInputError("StackedSketch needs at least one part")
        n = parts[0].n
        if any(part.n != n for part in parts):
            raise InvalidInputError("all stacked parts must share n")
        object.__setattr__(self, "parts", parts)

    @property
    def n(self):
        return self.parts[0].n

    @property
    def rows(self):
        return sum(part.m for part in self.parts)

    m = rows

    def __eq__(self, other):
        if not isinstance(other, StackedSketch):
            return NotImplemented
        return len(self.parts) == len(other.parts) and all(
            a == b for a, b in zip(self.parts, other.parts))

    def __repr__(self):
        return f"StackedSketch(rows={self.rows}, n={self.n}, parts={len(self.parts)})"


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_countsketch(m, n, seed=None):
    """Classical CountSketch: uniform bins, Rademacher values."""
    if m < 1 or n < 1:
        raise InvalidInputError(f"m and n must be >= 1, got m={m}, n={n}")
    rng = _rng(seed)
    p = rng.integers(0, m, size=n)
    v = rng.choice(np.array([-1.0, 1.0]), size=n)
    return CountSketch(m, n, p, v)


def identity_countsketch(n):
    """Lossless sketch: identity permutation with unit values (m = n)."""
    return CountSketch(n, n, np.arange(n), np.ones(n))


def zero_countsketch(m, n):
    return CountSketch(m, n, np.zeros(n, dtype=np.int64), np.zeros(n))


def sketch_n(S):
    if isinstance(S, (CountSketch, StackedSketch)):
        return S.n
    return np.asarray(S).shape[1]


def sketch_rows(S):
    if isinstance(S, (CountSketch, StackedSketch)):
        return S.rows
    return np.asarray(S).shape[0]


def apply_left(S, A):
    """S @ A for a CountSketch, StackedSketch or dense sketch matrix."""
    return _left(S, as_matrix(A))


def apply_right(A, R):
    """A @ R^T; equals ``apply_left(R, A.T).T``."""
    return _right(as_matrix(A), R)


# The unchecked forms skip the finiteness scan; callers pass validated float arrays.

def _left(S, A):
    n = sketch_n(S)
    if n != A.shape[0]:
        raise InvalidInputError(f"sketch has n={n} columns but A has {A.shape[0]} rows")
    if isinstance(S, CountSketch):
        return kernels.scatter_rows(S.p, S.v, A, S.m)
    if isinstance(S, StackedSketch):
        return np.vstack([_left(part, A) for part in S.parts])
    return np.asarray(S, dtype=np.float64) @ A


def _right(A, R):
    if isinstance(R, CountSketch):
        if R.n != A.shape[1]:
            raise InvalidInputError(f"sketch has n={R.n} columns but A has {A.shape[1]} columns")
        return kernels.scatter_cols(R.p, R.v, A, R.m)
    return _left(R, A.T).T


def to_dense(S):
    if isinstance(S, StackedSketch):
        return np.vstack([to_dense(part) for part in S.parts])
    if isinstance(S, CountSketch):
        out = np.zeros((S.m, S.n))
        out[S.p, np.arange(S.n)] = S.v
        return out
    return np.array(S, dtype=np.float64)


def stack(top, bottom):
    """Append the rows of ``bottom`` below ``top``; the row space of S A can only grow."""
    if top.n != bottom.n:
        raise InvalidInputError(f"cannot stack sketches with n={top.n} and n={bottom.n}")
    parts = []
    for part in (top, bottom):
        parts.extend(part.parts if isinstance(part, StackedSketch) else [part])
    return StackedSketch(tuple(parts))


def with_entry(S, col, bin, val):
    """Copy of S with column ``col`` moved to ``bin`` with value ``val``."""
    if not 0 <= col < S.n:
        raise InvalidInputError(f"column {col} outside [0, {S.n})")
    if not 0 <= bin < S.m:
        raise InvalidInputError(f"bin {bin} outside [0, {S.m})")
    p = S.p.copy()
    v = S.v.copy()
    p[col] = bin
    v[col] = val
    return CountSketch(S.m, S.n, p, v)


# --------------------------------------------------------------------------
# serialization


def to_dict(S):
    if isinstance(S, np.ndarray):
        return {"dense": S.tolist()}
    if isinstance(S, StackedSketch):
        return {"parts": [to_dict(part) for part in S.parts]}
    return {"m": S.m, "n": S.n,
            "p": [int(x) + 1 for x in S.p],
            "v": [float(x) for x in S.v]}


def from_dict(obj):
    if "dense" in obj:
        return as_matrix(np.asarray(obj["dense"], dtype=np.float64), "dense sketch")
    if "parts" in obj:
        return StackedSketch(tuple(from_dict(part) for part in obj["parts"]))
    try:
        p = np.asarray(obj["p"], dtype=np.int64) - 1
        return CountSketch(int(obj["m"]), int(obj["n"]), p, np.asarray(obj["v"], dtype=np.float64))
    except KeyError as exc:
        raise InvalidInputError(f"sketch object missing field {exc}") from None


def dumps(S):
    return json.dumps(to_dict(S))


def loads(text):
    return from_dict(json.loads(text))


def save(S, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(S))


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
