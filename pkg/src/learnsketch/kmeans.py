"""k-means objective, k-means++/Lloyd, sketched k-means and its ApproxCheck.

Cluster labels are 0-based in memory.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .matlin import InvalidInputError, as_matrix, svd
from .sketch import apply_left, sketch_n

LEARNED = "learned"
CLASSICAL = "classical"


@dataclass(frozen=True)
class Clustering:
    assignments: np.ndarray
    centers: np.ndarray
    cost: float
    trace: tuple = field(default=(), compare=False)

    @property
    def k(self):
        return self.centers.shape[0]


def _check_labels(labels, n, k=None):
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != n:
        raise InvalidInputError(f"need {n} assignments, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise InvalidInputError("assignments must be integers")
    labels = labels.astype(np.int64)
    if labels.size and labels.min() < 0:
        raise InvalidInputError("negative cluster index")
    if k is not None and labels.size and labels.max() >= k:
        raise InvalidInputError(f"cluster index >= k={k}")
    return labels


def cluster_means(A, labels, k):
    """Per-cluster means (k x d); empty clusters get a zero row."""
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, A.shape[1]))
    np.add.at(sums, labels, A)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = sums / counts[:, None]
    means[counts == 0] = 0.0
    return means


def kmeans_cost(A, assignments, k=None):
    """Sum of squared distances of rows to their cluster means."""
    A = as_matrix(A)
    labels = _check_labels(assignments, A.shape[0], k)
    kk = int(labels.max()) + 1 if k is None else k
    resid = A - cluster_means(A, labels, kk)[labels]
    return float(np.einsum("ij,ij->", resid, resid))


def cost_with_centers(A, assignments, centers):
    resid = A - np.asarray(centers)[assignments]
    return float(np.einsum("ij,ij->", resid, resid))


def kmeanspp_init(A, k, rng):
    n = A.shape[0]
    centers = np.empty((k, A.shape[1]))
    first = rng.integers(n)
    centers[0] = A[first]
    d2 = np.einsum("ij,ij->i", A - A[first], A - A[first])
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers[j] = A[idx]
        diff = A - A[idx]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return centers


def lloyd_kmeanspp(A, k, seed=None, max_iters=100):
    """k-means++ seeding followed by Lloyd iterations until the labels stop changing.

    The returned ``trace`` lists the cost of each iterate's assignment with
    optimal (mean) centers; it is non-increasing.
    """
    A = as_matrix(A)
    n = A.shape[0]
    if not 1 <= k <= n:
        raise InvalidInputError(f"k={k} must lie in [1, n={n}]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    centers = kmeanspp_init(A, k, rng)
    labels, dist = kernels.nearest_center(A, centers)
    labels = _repair_empty(A, labels, dist, k)
    trace = [kmeans_cost(A, labels, k)]
    for _ in range(max_iters):
        centers = cluster_means(A, labels, k)
        new, dist = kernels.nearest_center(A, centers)
        new = _repair_empty(A, new, dist, k)
        if np.array_equal(new, labels):
            break
        labels = new
        trace.append(kmeans_cost(A, labels, k))
    centers = cluster_means(A, labels, k)
    return Clustering(labels, centers, kmeans_cost(A, labels, k), tuple(trace))


def _repair_empty(A, labels, dist, k):
    # an empty cluster takes over the point farthest from its current center
    counts = np.bincount(labels, minlength=k)
    if np.all(counts > 0):
        return labels
    labels = labels.copy()
    dist = dist.copy()
    for j in np.flatnonzero(counts == 0):
        far = int(np.argmax(dist))
        if dist[far] <= 0.0 or counts[labels[far]] <= 1:
            break
        counts[labels[far]] -= 1
        labels[far] = j
        counts[j] = 1
        dist[far] = 0.0
    return labels


def projection_basis(SA):
    """Right singular vectors of S A spanning its numerical row space (d x r)."""
    res = svd(SA)
    return res.V[:, :res.rank]


def sketch_kmeans(A, S, k, seed=None, max_iters=100):
    """Cluster A V, where V spans row(S A), then re-express the clustering on A."""
    A = as_matrix(A)
    if sketch_n(S) != A.shape[0]:
        raise InvalidInputError(f"sketch has n={sketch_n(S)}, A has {A.shape[0]} rows")
    V = projection_basis(apply_left(S, A))
    if V.shape[1] == 0:
        # S A = 0: every point projects to the origin
        AV = np.zeros((A.shape[0], 1))
    else:
        AV = A @ V
    inner = lloyd_kmeanspp(AV, k, seed=seed, max_iters=max_iters)
    labels = inner.assignments
    return Clustering(labels, cluster_means(A, labels, k), kmeans_cost(A, labels, k), inner.trace)


def approx_check_kmeans(A, S_learned, S_classical, k, seed=None, return_costs=False):
    """Sketched k-means with both sketches; keep the one with the smaller exact cost (ties: learned)."""
    A = as_matrix(A)
    cl_l = sketch_kmeans(A, S_learned, k, seed=seed)
    cl_c = sketch_kmeans(A, S_classical, k, seed=seed)
    chosen, label = (cl_l, LEARNED) if cl_l.cost <= cl_c.cost else (cl_c, CLASSICAL)
    if return_costs:
        return chosen, label, {LEARNED: cl_l.cost, CLASSICAL: cl_c.cost}
    return chosen, label
