"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

Public functions dispatch on :func:`learnsketch._backend.get_backend` at call
time.  Both paths compute the same quantity; they may differ in the last few
ulps because the numpy path batches LAPACK calls.
"""

import numpy as np

from ._backend import get_backend, njit

# inactive bin: squared bin norm below this fraction of the largest bin
_EMPTY_TOL = 1e-14
# numerical rank cutoff on Gram eigenvalues (sigma cutoff 1e-6 relative)
_GRAM_RANK_TOL = 1e-12


# --------------------------------------------------------------------------
# CountSketch application: out[p[i]] += v[i] * A[i]


@njit(cache=True)
def _scatter_rows_nb(p, v, A, m):
    n, d = A.shape
    out = np.zeros((m, d))
    for i in range(n):
        vi = v[i]
        if vi == 0.0:
            continue
        row = p[i]
        for c in range(d):
            out[row, c] += vi * A[i, c]
    return out


def _scatter_rows_np(p, v, A, m):
    out = np.zeros((m, A.shape[1]))
    for j in np.unique(p[v != 0.0]):
        sel = p == j
        out[j] = v[sel] @ A[sel]
    return out


def scatter_rows(p, v, A, m):
    """Return the m x d matrix whose row j sums ``v[i] * A[i]`` over ``p[i] == j``."""
    p = np.ascontiguousarray(p, dtype=np.int64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if get_backend() == "numba":
        return _scatter_rows_nb(p, v, np.ascontiguousarray(A), m)
    return _scatter_rows_np(p, v, A, m)


@njit(cache=True)
def _scatter_cols_nb(p, v, A, m):
    n, d = A.shape
    out = np.zeros((n, m))
    for r in range(n):
        for c in range(d):
            if v[c] != 0.0:
                out[r, p[c]] += v[c] * A[r, c]
    return out


def _scatter_cols_np(p, v, A, m):
    # strided column gathers are slow in numpy; one dense GEMM is faster here
    R = np.zeros((A.shape[1], m))
    R[np.arange(A.shape[1]), p] = v
    return A @ R


def scatter_cols(p, v, A, m):
    """Return the n x m matrix whose column j sums ``v[c] * A[:, c]`` over ``p[c] == j``.

    Same result as ``scatter_rows(p, v, A.T, m).T`` without transposing A.
    """
    p = np.ascontiguousarray(p, dtype=np.int64)
    v = np.ascontiguousarray(v, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    if get_backend() == "numba":
        if not A.flags.c_contiguous and A.T.flags.c_contiguous:
            return _scatter_rows_nb(p, v, A.T, m).T
        return _scatter_cols_nb(p, v, np.ascontiguousarray(A), m)
    return _scatter_cols_np(p, v, A, m)


# --------------------------------------------------------------------------
# Top-k generalized eigenvalue sum of the pencil (H, G).
#
# For B = S A with G = B B^T and H = B A^T A B^T, the sum of the k largest
# eigenvalues of H w.r.t. G equals the squared Frobenius norm captured by the
# best rank-k approximation of A inside row(B).  Bins whose G diagonal is
# (numerically) zero are treated as absent.


@njit(cache=True)
def _topk_pencil_nb(G, H, k):
    m = G.shape[0]
    dmax = 0.0
    for i in range(m):
        if G[i, i] > dmax:
            dmax = G[i, i]
    if dmax <= 0.0:
        return 0.0
    tol = _EMPTY_TOL * dmax
    for i in range(m):
        if G[i, i] <= tol:
            for r in range(m):
                G[i, r] = 0.0
                G[r, i] = 0.0
                H[i, r] = 0.0
                H[r, i] = 0.0
            G[i, i] = dmax
    lam, U = np.linalg.eigh(G)
    lmax = lam[m - 1]
    W = np.zeros((m, m))
    for c in range(m):
        if lam[c] > _GRAM_RANK_TOL * lmax:
            inv = 1.0 / np.sqrt(lam[c])
            for r in range(m):
                W[r, c] = U[r, c] * inv
    M = np.ascontiguousarray(W.T) @ (H @ W)
    M = 0.5 * (M + M.T)
    ev = np.linalg.eigvalsh(M)
    total = 0.0
    taken = 0
    for idx in range(m - 1, -1, -1):
        if taken >= k:
            break
        if ev[idx] > 0.0:
            total += ev[idx]
        taken += 1
    return total


def _topk_pencil_np(Gs, Hs, k):
    Gs = np.array(Gs, dtype=np.float64)
    Hs = np.array(Hs, dtype=np.float64)
    C, m, _ = Gs.shape
    idx = np.arange(m)
    diag = Gs[:, idx, idx]
    dmax = diag.max(axis=1)
    dead = dmax <= 0.0
    dmax = np.where(dead, 1.0, dmax)
    inactive = diag <= _EMPTY_TOL * dmax[:, None]
    live = (~inactive).astype(np.float64)
    mask = live[:, :, None] * live[:, None, :]
    Gs *= mask
    Hs *= mask
    Gs[:, idx, idx] += inactive * dmax[:, None]
    lam, U = np.linalg.eigh(Gs)
    keep = lam > _GRAM_RANK_TOL * lam[:, -1:]
    inv = np.where(keep, 1.0 / np.sqrt(np.where(keep, lam, 1.0)), 0.0)
    W = U * inv[:, None, :]
    M = np.matmul(W.transpose(0, 2, 1), np.matmul(Hs, W))
    M = 0.5 * (M + M.transpose(0, 2, 1))
    ev = np.linalg.eigvalsh(M)[:, ::-1][:, :k]
    out = np.clip(ev, 0.0, None).sum(axis=1)
    out[dead] = 0.0
    return out


def topk_pencil(G, H, k):
    """Sum of the k largest eigenvalues of ``H x = lam G x`` on range(G)."""
    G = np.array(G, dtype=np.float64)
    H = np.array(H, dtype=np.float64)
    if get_backend() == "numba":
        return float(_topk_pencil_nb(G, H, int(k)))
    return float(_topk_pencil_np(G[None], H[None], int(k))[0])


# --------------------------------------------------------------------------
# Greedy candidate scoring.  Placing value s for the current column in bin j
# changes G by s (e_j c1^T + c1 e_j^T) + s^2 kii e_j e_j^T and H likewise with
# (c2, k2ii).  Returns captured mass for every (bin, sign) candidate.


@njit(cache=True)
def _score_column_nb(G, H, c1, c2, kii, k2ii, signs, k):
    m = G.shape[0]
    ns = signs.shape[0]
    out = np.empty((m, ns))
    Gc = np.empty((m, m))
    Hc = np.empty((m, m))
    for j in range(m):
        for t in range(ns):
            s = signs[t]
            for a in range(m):
                for b in range(m):
                    Gc[a, b] = G[a, b]
                    Hc[a, b] = H[a, b]
            for r in range(m):
                Gc[j, r] += s * c1[r]
                Gc[r, j] += s * c1[r]
                Hc[j, r] += s * c2[r]
                Hc[r, j] += s * c2[r]
            Gc[j, j] += s * s * kii
            Hc[j, j] += s * s * k2ii
            out[j, t] = _topk_pencil_nb(Gc, Hc, k)
    return out


def _score_column_np(G, H, c1, c2, kii, k2ii, signs, k):
    m = G.shape[0]
    ns = signs.shape[0]
    Gs = np.broadcast_to(G, (m, ns, m, m)).copy()
    Hs = np.broadcast_to(H, (m, ns, m, m)).copy()
    rows = np.arange(m)
    for t, s in enumerate(signs):
        Gs[rows, t, rows, :] += s * c1
        Gs[rows, t, :, rows] += s * c1
        Gs[rows, t, rows, rows] += s * s * kii
        Hs[rows, t, rows, :] += s * c2
        Hs[rows, t, :, rows] += s * c2
        Hs[rows, t, rows, rows] += s * s * k2ii
    scores = _topk_pencil_np(Gs.reshape(m * ns, m, m), Hs.reshape(m * ns, m, m), k)
    return scores.reshape(m, ns)


def score_column(G, H, c1, c2, kii, k2ii, signs, k):
    """Captured mass for each (bin, sign) placement of one column; shape (m, len(signs))."""
    G = np.ascontiguousarray(G, dtype=np.float64)
    H = np.ascontiguousarray(H, dtype=np.float64)
    c1 = np.ascontiguousarray(c1, dtype=np.float64)
    c2 = np.ascontiguousarray(c2, dtype=np.float64)
    signs = np.ascontiguousarray(signs, dtype=np.float64)
    if get_backend() == "numba":
        return _score_column_nb(G, H, c1, c2, float(kii), float(k2ii), signs, int(k))
    return _score_column_np(G, H, c1, c2, float(kii), float(k2ii), signs, int(k))


# --------------------------------------------------------------------------
# Nearest-center assignment for Lloyd iterations.


@njit(cache=True)
def _nearest_center_nb(X, C):
    n, d = X.shape
    k = C.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for i in range(n):
        best = np.inf
        arg = 0
        for j in range(k):
            acc = 0.0
            for c in range(d):
                diff = X[i, c] - C[j, c]
                acc += diff * diff
            if acc < best:
                best = acc
                arg = j
        labels[i] = arg
        dist[i] = best
    return labels, dist


def _nearest_center_np(X, C, block=2048):
    n = X.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist = np.empty(n)
    for lo in range(0, n, block):
        diff = X[lo:lo + block, None, :] - C[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        labels[lo:lo + block] = d2.argmin(axis=1)
        dist[lo:lo + block] = d2[np.arange(d2.shape[0]), labels[lo:lo + block]]
    return labels, dist


def nearest_center(X, C):
    """Index of and squared distance to the closest row of C for every row of X."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    if get_backend() == "numba":
        return _nearest_center_nb(X, C)
    return _nearest_center_np(X, C)
