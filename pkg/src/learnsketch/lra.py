"""Sketched low-rank approximation.

Contains the rank-k-in-a-subspace objectives used as training proxies, the
four-sketch ``sketch_lowrank`` pipeline with its small rank-constrained
solver, exact and sketched cost evaluation, and the learned-vs-classical
``approx_check_lra`` fallback.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .matlin import RANK_TOL, InvalidInputError, as_matrix, frob2, pseudo_inverse, svd
from .sketch import _left, _right, apply_left, apply_right, random_countsketch, sketch_n, sketch_rows

LEARNED = "learned"
CLASSICAL = "classical"


@dataclass(frozen=True)
class LowRankFactors:
    """Rank-k approximation stored as P (n x k) times Q (k x d)."""

    P: np.ndarray
    Q: np.ndarray
    degenerate: bool = False

    @property
    def k(self):
        return self.P.shape[1]

    def dense(self):
        return self.P @ self.Q


def default_sizes(k):
    """Desk-scale classical sizes: m_S = m_R = max(4k^2, k+10), m_V = m_W = 2 max(m_S, m_R)."""
    ms = max(4 * k * k, k + 10)
    return {"m_S": ms, "m_R": ms, "m_V": 2 * ms, "m_W": 2 * ms}


@dataclass(frozen=True)
class LraSketchSet:
    """S (m_S x n), R (m_R x d), V (m_V x n), W (m_W x d)."""

    S: object
    R: object
    V: object
    W: object

    def check(self, A):
        n, d = A.shape
        for name, sk, want in (("S", self.S, n), ("R", self.R, d), ("V", self.V, n), ("W", self.W, d)):
            if sketch_n(sk) != want:
                raise InvalidInputError(f"sketch {name} has n={sketch_n(sk)}, expected {want}")

    @property
    def embeddings_large_enough(self):
        return (sketch_rows(self.V) >= sketch_rows(self.R)
                and sketch_rows(self.W) >= sketch_rows(self.S))

    def replace(self, **kw):
        fields = {"S": self.S, "R": self.R, "V": self.V, "W": self.W}
        fields.update(kw)
        return LraSketchSet(**fields)


def classical_sketch_set(n, d, k, seed=None, m_S=None, m_R=None, m_V=None, m_W=None):
    """Four independent classical CountSketches, sized by :func:`default_sizes` unless given."""
    sizes = default_sizes(k)
    m_S = m_S or sizes["m_S"]
    m_R = m_R or sizes["m_R"]
    m_V = m_V or 2 * max(m_S, m_R)
    m_W = m_W or 2 * max(m_S, m_R)
    seeds = np.random.SeedSequence(seed).spawn(4)
    return LraSketchSet(
        S=random_countsketch(m_S, n, np.random.default_rng(seeds[0])),
        R=random_countsketch(m_R, d, np.random.default_rng(seeds[1])),
        V=random_countsketch(m_V, n, np.random.default_rng(seeds[2])),
        W=random_countsketch(m_W, d, np.random.default_rng(seeds[3])),
    )


def row_basis(B):
    """Orthonormal basis (d x r) of row(B) from a pivoted QR of B^T."""
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] == 0:
        raise InvalidInputError("row space of an empty matrix")
    Q, R, _ = scipy.linalg.qr(B.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros((B.shape[1], 0))
    r = int(np.sum(diag > RANK_TOL * diag[0]))
    return Q[:, :r]


def _pad(P, Q, k):
    kk = P.shape[1]
    if kk < k:
        P = np.hstack([P, np.zeros((P.shape[0], k - kk))])
        Q = np.vstack([Q, np.zeros((k - kk, Q.shape[1]))])
    return P, Q


def lra_cost(A, F, block=4096):
    """||A - P Q||_F^2, accumulated over row blocks so P Q is never held whole."""
    A = as_matrix(A)
    P, Q = F.P, F.Q
    if P.shape[0] != A.shape[0] or Q.shape[1] != A.shape[1] or P.shape[1] != Q.shape[0]:
        raise InvalidInputError("factor shapes do not conform to A")
    total = 0.0
    for lo in range(0, A.shape[0], block):
        resid = A[lo:lo + block] - P[lo:lo + block] @ Q
        total += float(np.einsum("ij,ij->", resid, resid))
    return total


def best_rank_k_in_rowspace(A, B, k):
    """Best rank-k approximation of A whose rows lie in row(B): ``[A V]_k V^T``.

    Returns ``(LowRankFactors, cost)``.  When k exceeds dim row(B) the factors
    are padded with zero directions.
    """
    A = as_matrix(A)
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] == 0:
        raise InvalidInputError("B must be a non-empty 2-D matrix")
    if B.shape[1] != A.shape[1]:
        raise InvalidInputError(f"B has {B.shape[1]} columns, A has {A.shape[1]}")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    Vb = row_basis(B)
    r = Vb.shape[1]
    if r == 0:
        F = LowRankFactors(np.zeros((A.shape[0], k)), np.zeros((k, A.shape[1])))
        return F, frob2(A)
    AV = A @ Vb
    top = svd(AV, min(k, r))
    P, Q = _pad(top.U * top.sigma, top.V.T @ Vb.T, k)
    F = LowRankFactors(P, Q)
    return F, lra_cost(A, F)


def best_rank_k_in_colspace(A, C, k):
    """Best rank-k approximation of A whose columns lie in col(C)."""
    A = as_matrix(A)
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != A.shape[0]:
        raise InvalidInputError("C must have as many rows as A")
    Ft, cost = best_rank_k_in_rowspace(A.T, C.T, k)
    return LowRankFactors(Ft.Q.T.copy(), Ft.P.T.copy()), cost


class SmallSolve(NamedTuple):
    Z_L: np.ndarray
    Z_R: np.ndarray
    residual: float
    degenerate: bool


def _numerical_rank(M):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > RANK_TOL * s[0]))


def solve_small_rank_k(C, D, G, k):
    """Minimize ||C Z D - G||_F^2 over rank-k Z, returned as ``Z = Z_L Z_R``.

    QR-factor C = U_C T_C and D^T = U_D T_D, take the best rank-k part of the
    projected core U_C^T G U_D, then undo the triangular factors.  A
    rank-deficient triangular factor is handled with its pseudo-inverse (the
    core is first projected onto what that factor can reach) and flagged.
    """
    C = as_matrix(C, "C")
    D = as_matrix(D, "D")
    G = as_matrix(G, "G")
    if C.shape[0] != G.shape[0] or D.shape[1] != G.shape[1]:
        raise InvalidInputError(f"shapes C{C.shape} D{D.shape} G{G.shape} do not conform")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")

    Uc, Tc = np.linalg.qr(C, mode="reduced")
    Ud, Td = np.linalg.qr(D.T, mode="reduced")
    core = Uc.T @ G @ Ud

    rank_c = _numerical_rank(Tc)
    rank_d = _numerical_rank(Td)
    degenerate = rank_c < min(Tc.shape) or rank_d < min(Td.shape)
    Tc_pinv = pseudo_inverse(Tc)
    Td_pinv = pseudo_inverse(Td)
    if degenerate:
        core = (Tc @ Tc_pinv) @ core @ (Td @ Td_pinv).T

    kk = min(k, min(core.shape))
    top = svd(core, kk)
    Z_L = Tc_pinv @ (top.U * top.sigma)
    Z_R = top.V.T @ Td_pinv.T
    Z_L, Z_R = _pad(Z_L, Z_R, k)
    resid = C @ Z_L @ (Z_R @ D) - G
    return SmallSolve(Z_L, Z_R, frob2(resid), bool(degenerate))


def sketch_lowrank(A, sk: LraSketchSet, k):
    """Rank-k approximation ``A R^T Z S A`` from four sketches, in factored form."""
    A = as_matrix(A)
    sk.check(A)
    if k < 1 or k > min(sketch_rows(sk.S), sketch_rows(sk.R)):
        raise InvalidInputError(
            f"k={k} must lie in [1, min(m_S, m_R)={min(sketch_rows(sk.S), sketch_rows(sk.R))}]")
    AR = _right(A, sk.R)
    SA = _left(sk.S, A)
    C = _left(sk.V, AR)
    D = _right(SA, sk.W)
    G = _right(_left(sk.V, A), sk.W)
    sol = solve_small_rank_k(C, D, G, k)
    return LowRankFactors(AR @ sol.Z_L, sol.Z_R @ SA, sol.degenerate)


def sketched_lra_cost(A, F, S2, R2):
    """||S2 (P Q - A) R2^T||_F^2 evaluated as ||(S2 P)(Q R2^T) - S2 A R2^T||_F^2."""
    A = as_matrix(A)
    if sketch_n(S2) != A.shape[0] or sketch_n(R2) != A.shape[1]:
        raise InvalidInputError("estimation sketches do not conform to A")
    SP = apply_left(S2, F.P)
    QR = apply_right(F.Q, R2)
    SAR = apply_right(apply_left(S2, A), R2)
    return frob2(SP @ QR - SAR)


def approx_check_lra(A, learned, classical, k, m_prime, seed=None, return_estimates=False):
    """Run both sketch sets and keep the solution with the smaller sketched cost.

    Costs are estimated with a fresh pair of classical CountSketches of
    ``m_prime`` rows shared by both candidates; exact ties go to the learned one.
    """
    A = as_matrix(A)
    F_l = sketch_lowrank(A, learned, k)
    F_c = sketch_lowrank(A, classical, k)
    s_seed, r_seed = np.random.SeedSequence(seed).spawn(2)
    S2 = random_countsketch(m_prime, A.shape[0], np.random.default_rng(s_seed))
    R2 = random_countsketch(m_prime, A.shape[1], np.random.default_rng(r_seed))
    est_l = sketched_lra_cost(A, F_l, S2, R2)
    est_c = sketched_lra_cost(A, F_c, S2, R2)
    chosen, label = (F_l, LEARNED) if est_l <= est_c else (F_c, CLASSICAL)
    if return_estimates:
        return chosen, label, {LEARNED: est_l, CLASSICAL: est_c}
    return chosen, label
