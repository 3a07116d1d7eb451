"""Learning CountSketches: greedy positions, gradient-descent values, baselines.

Both stages optimize the rank-k-in-row-space proxy

    loss(S, A) = ||[A V]_k V^T - A||_F^2,   V an orthonormal basis of row(S A),

summed over a training set.  Writing K = A A^T, G = S K S^T and H = S K^2 S^T,
the proxy equals ``tr(K)`` minus the k largest eigenvalues of the pencil
(H, G).  Adding one entry to S changes G and H in a single row and column, so
every greedy candidate is scored from m x m matrices (see
:func:`learnsketch.kernels.score_column`) without touching the d columns of A.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .lra import best_rank_k_in_colspace, best_rank_k_in_rowspace
from .matlin import InvalidInputError, as_matrix, frob2, svd
from .sketch import CountSketch, apply_left, apply_right, random_countsketch

logger = logging.getLogger(__name__)

ROWSPACE = "rowspace"
COLSPACE = "colspace"
ORDERINGS = ("column-order", "nonincreasing-norm", "random")

# relative (to total training mass) gap below which greedy candidates tie
_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class TrainSet:
    matrices: tuple

    def __post_init__(self):
        mats = tuple(as_matrix(A, "training matrix") for A in self.matrices)
        if not mats:
            raise InvalidInputError("TrainSet needs at least one matrix")
        shape = mats[0].shape
        for A in mats:
            if A.shape != shape:
                raise InvalidInputError(f"TrainSet shapes differ: {shape} vs {A.shape}")
        object.__setattr__(self, "matrices", mats)

    @property
    def shape(self):
        return self.matrices[0].shape

    def __len__(self):
        return len(self.matrices)

    def __iter__(self):
        return iter(self.matrices)

    def transposed(self):
        return TrainSet(tuple(np.ascontiguousarray(A.T) for A in self.matrices))


def as_trainset(Tr):
    return Tr if isinstance(Tr, TrainSet) else TrainSet(tuple(Tr))


@dataclass(frozen=True)
class GreedyConfig:
    m: int
    k: int
    ordering: str = "nonincreasing-norm"
    signs: Sequence[float] = (1.0, -1.0)
    proxy: str = ROWSPACE
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise InvalidInputError(f"m and k must be >= 1, got m={self.m}, k={self.k}")
        if self.ordering not in ORDERINGS:
            raise InvalidInputError(f"ordering must be one of {ORDERINGS}")
        if self.proxy not in (ROWSPACE, COLSPACE):
            raise InvalidInputError(f"proxy must be {ROWSPACE!r} or {COLSPACE!r}")
        signs = tuple(float(s) for s in self.signs)
        if not signs or any(s not in (1.0, -1.0) for s in signs) or len(set(signs)) != len(signs):
            raise InvalidInputError(f"signs must be a non-empty subset of {{+1, -1}}, got {self.signs}")
        # +1 is tried first so that it wins ties
        object.__setattr__(self, "signs", tuple(sorted(signs, reverse=True)))


def _oriented(Tr, proxy):
    Tr = as_trainset(Tr)
    return Tr.transposed() if proxy == COLSPACE else Tr


def proxy_loss(S, A, k, proxy=ROWSPACE):
    """Best rank-k error of A inside row(S A) (rowspace) or col(A S^T) (colspace)."""
    A = as_matrix(A)
    if proxy == ROWSPACE:
        return best_rank_k_in_rowspace(A, apply_left(S, A), k)[1]
    if proxy == COLSPACE:
        return best_rank_k_in_colspace(A, apply_right(A, S), k)[1]
    raise InvalidInputError(f"unknown proxy {proxy!r}")


def mean_proxy_loss(S, Tr, k, proxy=ROWSPACE):
    return math.fsum(proxy_loss(S, A, k, proxy) for A in as_trainset(Tr)) / len(as_trainset(Tr))


def column_order(Tr, ordering, seed=0):
    """Visiting order for greedy placement; ``Tr`` is already oriented (rows are sketched)."""
    n = Tr.shape[0]
    if ordering == "column-order":
        return np.arange(n)
    if ordering == "random":
        return np.random.default_rng(seed).permutation(n)
    norms = np.max([np.linalg.norm(A, axis=1) for A in Tr], axis=0)
    return np.argsort(-norms, kind="stable")


def greedy_positions(Tr, cfg: GreedyConfig, return_trace=False):
    """Place one nonzero per column, greedily minimizing the summed proxy loss.

    Starting from the zero sketch, columns are visited in ``cfg.ordering``;
    for each, every bin and every allowed sign is scored and the lowest total
    loss is committed.  Ties go to the smallest bin, then to +1.  With
    ``return_trace`` the mean training loss after each placement is returned
    as well.
    """
    Tr = _oriented(Tr, cfg.proxy)
    mats = Tr.matrices
    n = Tr.shape[0]
    m, k = cfg.m, cfg.k
    if m > n:
        warnings.warn(f"m={m} exceeds the sketched dimension n={n}; some bins stay empty",
                      stacklevel=2)
    signs = np.asarray(cfg.signs)
    order = column_order(Tr, cfg.ordering, cfg.seed)

    N = len(mats)
    SK = [np.zeros((m, n)) for _ in range(N)]
    G = [np.zeros((m, m)) for _ in range(N)]
    H = [np.zeros((m, m)) for _ in range(N)]
    trK = [frob2(A) for A in mats]
    tol = _TIE_RTOL * math.fsum(trK) + 1e-300

    p = np.zeros(n, dtype=np.int64)
    v = np.zeros(n)
    trace = []
    for step, i in enumerate(order):
        ki, c1, c2, losses = [], [], [], []
        for t, A in enumerate(mats):
            kcol = A @ A[i]
            a1 = SK[t][:, i].copy()
            a2 = SK[t] @ kcol
            captured = kernels.score_column(G[t], H[t], a1, a2, kcol[i], kcol @ kcol, signs, k)
            ki.append(kcol)
            c1.append(a1)
            c2.append(a2)
            losses.append(trK[t] - captured)
        total = _fsum_axis0(np.stack(losses))

        best_j, best_t = 0, 0
        best = total[0, 0]
        for j in range(m):
            for t in range(len(signs)):
                if total[j, t] < best - tol:
                    best, best_j, best_t = total[j, t], j, t
        s = signs[best_t]
        for t in range(N):
            _commit(G[t], c1[t], ki[t][i], best_j, s)
            _commit(H[t], c2[t], ki[t] @ ki[t], best_j, s)
            SK[t][best_j] += s * ki[t]
        p[i] = best_j
        v[i] = s
        trace.append(best / N)
        logger.debug("greedy column %d (%d/%d) -> bin %d sign %+d loss %.6g",
                     i, step + 1, n, best_j, int(s), best / N)
    S = CountSketch(m, n, p, v)
    return (S, trace) if return_trace else S


def _commit(M, c, diag, j, s):
    M[j, :] += s * c
    M[:, j] += s * c
    M[j, j] += s * s * diag


def _fsum_axis0(arr):
    flat = arr.reshape(arr.shape[0], -1)
    return np.array([math.fsum(flat[:, c]) for c in range(flat.shape[1])]).reshape(arr.shape[1:])


def greedy_positions_lra_pair(Tr, cfgS: GreedyConfig, cfgR: GreedyConfig):
    """Independent greedy runs for the left sketch S (row space) and right sketch R (column space)."""
    if cfgS.proxy != ROWSPACE or cfgR.proxy != COLSPACE:
        raise InvalidInputError("S must use the rowspace proxy and R the colspace proxy")
    return greedy_positions(Tr, cfgS), greedy_positions(Tr, cfgR)


# --------------------------------------------------------------------------
# value optimization


def _pencil_top(G, H, k):
    """Top-k positive eigenpairs of (H, G) on range(G); eigenvectors satisfy x^T G x = 1."""
    m = G.shape[0]
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(H))):
        return np.array([np.nan]), np.full((m, 1), np.nan)
    G = G.copy()
    H = H.copy()
    diag = np.diag(G).copy()
    dmax = diag.max() if m else 0.0
    if dmax <= 0.0:
        return np.zeros(0), np.zeros((m, 0))
    inactive = diag <= 1e-14 * dmax
    G[inactive, :] = 0.0
    G[:, inactive] = 0.0
    H[inactive, :] = 0.0
    H[:, inactive] = 0.0
    G[inactive, inactive] = dmax
    lam, U = np.linalg.eigh(G)
    keep = lam > 1e-12 * lam[-1]
    W = U[:, keep] / np.sqrt(lam[keep])
    M = W.T @ H @ W
    ev, Z = np.linalg.eigh(0.5 * (M + M.T))
    ev, Z = ev[::-1][:k], Z[:, ::-1][:, :k]
    pos = ev > 1e-14 * max(ev[0] if ev.size else 0.0, 1e-300)
    return ev[pos], W @ Z[:, pos]


def proxy_value_and_grad(A, p, v, m, k):
    """Row-space proxy loss of CS(p, v) on A and its gradient w.r.t. v.

    For a simple top-k eigenvalue lam with G-normalized eigenvector x,
    d lam / d v_c = 2 x[p_c] ((K^2 y)_c - lam (K y)_c) with y = S^T x.
    """
    SA = kernels.scatter_rows(p, v, A, m)
    Y = SA @ A.T
    G = SA @ SA.T
    H = Y @ Y.T
    lam, X = _pencil_top(G, H, k)
    loss = frob2(A) - math.fsum(lam)
    if lam.size == 0:
        return loss, np.zeros_like(v)
    Xp = X[p]                    # n x r, x_i[p_c]
    Yv = v[:, None] * Xp         # y_i = S^T x_i
    Ky = A @ (A.T @ Yv)
    K2y = A @ (A.T @ Ky)
    grad = -2.0 * np.sum(Xp * (K2y - Ky * lam[None, :]), axis=1)
    return loss, grad


def _objective(mats, p, m, k):
    N = len(mats)

    def f(v, need_grad=True):
        vals, grads = [], []
        for A in mats:
            if need_grad:
                val, g = proxy_value_and_grad(A, p, v, m, k)
                grads.append(g)
            else:
                SA = kernels.scatter_rows(p, v, A, m)
                Y = SA @ A.T
                val = frob2(A) - math.fsum(_pencil_top(SA @ SA.T, Y @ Y.T, k)[0])
            vals.append(val)
        loss = math.fsum(vals) / N
        if not need_grad:
            return loss
        grad = np.sum(grads, axis=0) / N
        return loss, grad

    return f


def optimize_values(Tr, p, v0, k, proxy=ROWSPACE, steps=200, step_size=0.1, m=None,
                    max_halvings=60):
    """Gradient descent on the mean proxy loss over values v with positions p fixed.

    Each step starts from twice the last accepted step (capped at
    ``step_size``) and halves it until the loss does not increase, so the
    returned ``trace`` (loss before the first step, then after every accepted
    step) is non-increasing.  Stops early when no step size decreases the loss.
    """
    if steps < 0 or step_size <= 0:
        raise InvalidInputError("steps must be >= 0 and step_size > 0")
    mats = _oriented(Tr, proxy).matrices
    p = np.asarray(p, dtype=np.int64)
    v = np.array(v0, dtype=np.float64)
    n = mats[0].shape[0]
    if p.shape != (n,) or v.shape != (n,):
        raise InvalidInputError(f"p and v0 must have length {n}")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("v0 must be finite")
    m = int(p.max()) + 1 if m is None else int(m)
    f = _objective(mats, p, m, k)

    loss, grad = f(v)
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise FloatingPointError(f"non-finite proxy loss {loss} at the initial values")
    trace = [loss]
    step = step_size
    for it in range(steps):
        if not np.any(grad):
            break
        t = min(2.0 * step, step_size)
        for _ in range(max_halvings):
            cand = v - t * grad
            new = f(cand, need_grad=False)
            if np.isfinite(new) and new <= loss:
                break
            t *= 0.5
        else:
            logger.debug("value optimization stalled at step %d, loss %.6g", it, loss)
            break
        v = cand
        step = t
        loss, grad = f(v)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"non-finite proxy loss {loss} at step {it}")
        trace.append(min(loss, trace[-1]))
    return v, trace


def train_pipeline(Tr, cfg: GreedyConfig, value_steps=200, step_size=0.1, return_trace=False):
    """Greedy positions, then gradient descent on the values at those positions."""
    Tr = as_trainset(Tr)
    S, greedy_trace = greedy_positions(Tr, cfg, return_trace=True)
    if value_steps == 0:
        return (S, {"greedy": greedy_trace, "values": []}) if return_trace else S
    v, trace = optimize_values(Tr, S.p, S.v, cfg.k, cfg.proxy, value_steps, step_size, m=cfg.m)
    out = CountSketch(S.m, S.n, S.p, v)
    return (out, {"greedy": greedy_trace, "values": trace}) if return_trace else out


def ivy19_baseline(Tr, m, k, seed=None, value_steps=200, step_size=0.1, proxy=ROWSPACE,
                   return_trace=False):
    """Random CountSketch positions with learned values."""
    mats = _oriented(Tr, proxy)
    S = random_countsketch(m, mats.shape[0], seed)
    if value_steps == 0:
        return (S, []) if return_trace else S
    v, trace = optimize_values(Tr, S.p, S.v, k, proxy, value_steps, step_size, m=m)
    out = CountSketch(m, S.n, S.p, v)
    return (out, trace) if return_trace else out


def exact_svd_sketch(sample, m, role=ROWSPACE):
    """Dense m-row sketch from one sample: U_m^T for left sketching, V_m^T for right sketching."""
    sample = as_matrix(sample, "sample")
    if not 1 <= m <= min(sample.shape):
        raise InvalidInputError(f"m={m} outside [1, {min(sample.shape)}]")
    res = svd(sample, m)
    return (res.U if role == ROWSPACE else res.V).T.copy()


def column_sampling_sketch(sample, m, seed=None, role=ROWSPACE):
    """CountSketch from one sample: m rows picked with probability proportional to
    squared norm (without replacement), each alone in a bin with value 1/norm;
    all other columns get value 0."""
    sample = as_matrix(sample, "sample")
    if m < 1:
        raise InvalidInputError(f"m must be >= 1, got {m}")
    X = sample if role == ROWSPACE else sample.T
    norms = np.linalg.norm(X, axis=1)
    w = norms ** 2
    if w.sum() <= 0.0:
        raise InvalidInputError("sample is all zeros")
    n = X.shape[0]
    take = min(m, int(np.count_nonzero(w)))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(n, size=take, replace=False, p=w / w.sum())
    p = np.zeros(n, dtype=np.int64)
    v = np.zeros(n)
    p[chosen] = np.arange(take)
    v[chosen] = 1.0 / norms[chosen]
    return CountSketch(m, n, p, v)
