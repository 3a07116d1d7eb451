"""Dense linear-algebra core: SVD, truncation, QR, pseudo-inverse, rank-1 SVD update.

LAPACK (through numpy) does the factorizations; this module fixes sign
conventions, rank cutoffs and input validation so that downstream results are
reproducible.
"""

from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-12


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


def as_matrix(A, name="A"):
    """Validate and return ``A`` as a finite 2-D float64 array (no copy if possible)."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise InvalidInputError(f"{name} must be 2-D, got shape {A.shape}")
    if A.shape[0] == 0 or A.shape[1] == 0:
        raise InvalidInputError(f"{name} has a zero dimension: {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains NaN or Inf")
    return A


def frob2(A):
    """Squared Frobenius norm."""
    A = np.asarray(A, dtype=np.float64)
    return float(np.einsum("ij,ij->", A, A)) if A.ndim == 2 else float(A @ A)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``A = U diag(sigma) V^T`` with U (n x r), V (d x r)."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        if self.sigma.size == 0:
            return 0
        return int(np.sum(self.sigma > RANK_TOL * self.sigma[0]))

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.T


def _fix_signs(U, V):
    # largest-magnitude entry of every U column made non-negative
    if U.shape[1] == 0:
        return U, V
    idx = np.argmax(np.abs(U), axis=0)
    flip = np.where(U[idx, np.arange(U.shape[1])] < 0, -1.0, 1.0)
    return U * flip, V * flip


def svd(A, r=None):
    """Top-``r`` (default: all min(n, d)) singular triplets of A."""
    A = as_matrix(A)
    full = min(A.shape)
    if r is None:
        r = full
    if not 0 <= r <= full:
        raise InvalidInputError(f"r={r} outside [0, {full}]")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    U, V = _fix_signs(U[:, :r], Vt[:r].T)
    return SvdResult(np.ascontiguousarray(U), s[:r].copy(), np.ascontiguousarray(V))


def truncate_rank_k(A, k):
    """Best rank-k approximation [A]_k = U_k S_k V_k^T."""
    A = as_matrix(A)
    if not 1 <= k <= min(A.shape):
        raise InvalidInputError(f"k={k} outside [1, {min(A.shape)}]")
    return svd(A, k).reconstruct()


def tail_energy(A, k):
    """||A - [A]_k||_F^2, the sum of squared singular values past the k-th."""
    s = np.linalg.svd(as_matrix(A), compute_uv=False)
    return float(np.sum(s[k:] ** 2))


def qr(A):
    """Thin QR with non-negative diagonal in R."""
    A = as_matrix(A)
    Q, R = np.linalg.qr(A, mode="reduced")
    flip = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * flip, R * flip[:, None]


def pseudo_inverse(A, rtol=RANK_TOL):
    """Moore-Penrose inverse; singular values <= rtol * sigma_max stay un-inverted."""
    A = as_matrix(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = s > rtol * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (Vt.T * inv) @ U.T


def orth_complement_part(Q, x):
    """Component of x orthogonal to the orthonormal columns of Q, with one re-orthogonalization."""
    coef = Q.T @ x
    resid = x - Q @ coef
    corr = Q.T @ resid
    return coef + corr, resid - Q @ corr


def rank1_svd_update(s: SvdResult, a, b, rtol=RANK_TOL) -> SvdResult:
    """SVD of ``M + a b^T`` given the thin SVD of M (Brand's update).

    The result keeps only singular values above ``rtol`` times the largest,
    so the rank can grow by one or shrink.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    U, sig, V = s.U, s.sigma, s.V
    if a.shape[0] != U.shape[0] or b.shape[0] != V.shape[0]:
        raise InvalidInputError(
            f"update vectors ({a.shape[0]}, {b.shape[0]}) do not conform to "
            f"({U.shape[0]}, {V.shape[0]})")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidInputError("update vectors must be finite")
    if not np.any(a) or not np.any(b):
        return s

    ma, pa = orth_complement_part(U, a)
    nb, qb = orth_complement_part(V, b)
    ra = float(np.linalg.norm(pa))
    rb = float(np.linalg.norm(qb))
    scale = max(np.linalg.norm(a), 1.0)
    P = pa / ra if ra > 1e-14 * scale else np.zeros_like(pa)
    Q = qb / rb if rb > 1e-14 * max(np.linalg.norm(b), 1.0) else np.zeros_like(qb)

    r = sig.size
    K = np.zeros((r + 1, r + 1))
    K[:r, :r] = np.diag(sig)
    K += np.outer(np.append(ma, ra), np.append(nb, rb))
    Uk, sk, Vkt = np.linalg.svd(K)

    Unew = np.column_stack([U, P]) @ Uk
    Vnew = np.column_stack([V, Q]) @ Vkt.T
    keep = sk > rtol * sk[0] if sk[0] > 0 else np.zeros_like(sk, dtype=bool)
    Unew, Vnew = _fix_signs(Unew[:, keep], Vnew[:, keep])
    return SvdResult(Unew, sk[keep], Vnew)
