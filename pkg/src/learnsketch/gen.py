"""Seeded generators: spiked-covariance rows, Zipfian orthogonal rows, Gaussian clusters."""

from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np

from .matlin import InvalidInputError


@dataclass(frozen=True)
class SpikedParams:
    n: int
    d: int
    s: int
    ell: float
    heavy_indices: Optional[Tuple[int, ...]] = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidInputError(f"dims must be positive, got n={self.n}, d={self.d}")
        if not 0 <= self.s < self.n:
            raise InvalidInputError(f"need 0 <= s < n, got s={self.s}, n={self.n}")
        if self.ell <= 1:
            raise InvalidInputError(f"heavy norm must exceed 1, got {self.ell}")
        heavy = tuple(range(self.s)) if self.heavy_indices is None else tuple(
            int(i) for i in self.heavy_indices)
        if len(heavy) != self.s or len(set(heavy)) != self.s:
            raise InvalidInputError("heavy_indices must be s distinct indices")
        if heavy and (min(heavy) < 0 or max(heavy) >= self.n):
            raise InvalidInputError("heavy index out of range")
        object.__setattr__(self, "heavy_indices", heavy)

    def with_seed(self, seed):
        return SpikedParams(self.n, self.d, self.s, self.ell, self.heavy_indices, seed)

    def to_dict(self):
        out = asdict(self)
        out["heavy_indices"] = list(self.heavy_indices)
        return out


@dataclass(frozen=True)
class ZipfParams:
    h_n: int
    d: int
    seed: int = 0
    n: int = field(init=False)

    def __post_init__(self):
        if self.h_n < 1:
            raise InvalidInputError(f"h_n must be >= 1, got {self.h_n}")
        n = zipf_rows(self.h_n)
        if self.d < n:
            raise InvalidInputError(f"orthogonal rows need d >= n={n}, got d={self.d}")
        object.__setattr__(self, "n", n)

    def with_seed(self, seed):
        return ZipfParams(self.h_n, self.d, seed)

    def to_dict(self):
        return {"h_n": self.h_n, "d": self.d, "seed": self.seed, "n": self.n}


def zipf_rows(h_n):
    """Row count sum_{i=1..h_n} 2^(i+1) = 2^(h_n+2) - 4."""
    return 2 ** (h_n + 2) - 4


def zipf_level_norms2(h_n):
    """Squared row norm for every row, level by level (level i: 2^(i+1) rows of n^2/4^i)."""
    n = zipf_rows(h_n)
    return np.concatenate([np.full(2 ** (i + 1), n * n / 4.0 ** i) for i in range(1, h_n + 1)])


def random_unit_rows(rng, n, d):
    X = rng.standard_normal((n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def gen_spiked(params: SpikedParams):
    """Random unit rows, with rows at ``heavy_indices`` scaled to norm ell."""
    rng = np.random.default_rng(params.seed)
    A = random_unit_rows(rng, params.n, params.d)
    if params.s:
        A[list(params.heavy_indices)] *= params.ell
    return A


def gen_zipf(params: ZipfParams):
    """n mutually orthogonal random rows with Zipfian squared norms (heaviest first)."""
    rng = np.random.default_rng(params.seed)
    Q, _ = np.linalg.qr(rng.standard_normal((params.d, params.n)))
    return Q.T * np.sqrt(zipf_level_norms2(params.h_n))[:, None]


def gen_gaussian_clusters(n, d, k, separation, seed=None):
    """k unit-variance blobs around centers at pairwise distance ``separation``.

    Centers are ``separation / sqrt(2)`` times random orthonormal directions, so
    every pair is exactly ``separation`` apart (requires k <= d).  Points are
    split into k contiguous blocks of near-equal size.  Returns (A, labels).
    """
    if n < 1 or d < 1 or not 1 <= k <= n:
        raise InvalidInputError(f"invalid dims n={n}, d={d}, k={k}")
    if k > d:
        raise InvalidInputError(f"need k <= d for orthogonal centers, got k={k}, d={d}")
    if separation < 0:
        raise InvalidInputError("separation must be non-negative")
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((d, k)))
    centers = Q.T * (separation / np.sqrt(2.0))
    labels = np.repeat(np.arange(k), np.diff(np.linspace(0, n, k + 1).round().astype(int)))
    A = centers[labels] + rng.standard_normal((n, d))
    return A, labels
