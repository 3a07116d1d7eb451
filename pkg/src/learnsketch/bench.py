"""Timing helpers: per-method offline/online cost and numba-vs-numpy kernel comparison."""

import statistics
import time

import numpy as np

from . import _backend, kernels, learn, lra
from .sketch import random_countsketch

METHODS = ("ours", "ivy19", "classical", "exact-svd", "col-sampling")


def median_time(fn, trials):
    times = []
    out = None
    for _ in range(trials):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), out


def build_sketch(method, Tr, m, k, seed, value_steps, step_size, proxy=learn.ROWSPACE):
    """Train or construct one sketch of ``method`` on ``Tr`` for the given proxy side."""
    Tr = learn.as_trainset(Tr)
    n = Tr.shape[0] if proxy == learn.ROWSPACE else Tr.shape[1]
    if method == "ours":
        cfg = learn.GreedyConfig(m=m, k=k, proxy=proxy, seed=seed)
        return learn.train_pipeline(Tr, cfg, value_steps, step_size, return_trace=True)
    if method == "ivy19":
        S, trace = learn.ivy19_baseline(Tr, m, k, seed, value_steps, step_size, proxy,
                                        return_trace=True)
        return S, {"greedy": [], "values": trace}
    if method == "classical":
        return random_countsketch(m, n, seed), {"greedy": [], "values": []}
    if method == "exact-svd":
        return learn.exact_svd_sketch(Tr.matrices[0], m, proxy), {"greedy": [], "values": []}
    if method == "col-sampling":
        S = learn.column_sampling_sketch(Tr.matrices[0], m, seed, proxy)
        return S, {"greedy": [], "values": []}
    raise ValueError(f"unknown method {method!r}")


def time_methods(Tr, A, m, k, methods=METHODS, trials=3, seed=0, value_steps=20, step_size=0.1):
    """Median offline (training) and online (sketch_lowrank on A) seconds per method."""
    rows = []
    n, d = A.shape
    for method in methods:
        def offline():
            S, _ = build_sketch(method, Tr, m, k, seed, value_steps, step_size, learn.ROWSPACE)
            R, _ = build_sketch(method, Tr, m, k, seed + 1, value_steps, step_size, learn.COLSPACE)
            return S, R

        off, (S, R) = median_time(offline, trials)
        vw = lra.classical_sketch_set(n, d, k, seed=seed, m_S=m, m_R=m)
        sk = vw.replace(S=S, R=R)
        lra.sketch_lowrank(A, sk, k)  # warm-up: kernel loading is not online cost
        on, _ = median_time(lambda: lra.sketch_lowrank(A, sk, k), trials)
        rows.append({"method": method, "offline_s": off, "online_s": on, "trials": trials})
    return rows


def _kernel_cases(rng, n, d, m, k):
    A = rng.standard_normal((n, d))
    S = random_countsketch(m, n, rng)
    R = random_countsketch(m, d, rng)
    B = rng.standard_normal((m, 3 * m))
    G = B @ B.T
    H = B @ rng.standard_normal((3 * m, 3 * m)) @ B.T
    H = H @ H.T
    c1, c2 = rng.standard_normal(m), rng.standard_normal(m)
    signs = np.array([1.0, -1.0])
    X = rng.standard_normal((4 * n, 16))
    C = rng.standard_normal((8, 16))
    return {
        "scatter_rows": lambda: kernels.scatter_rows(S.p, S.v, A, m),
        "scatter_cols": lambda: kernels.scatter_cols(R.p, R.v, A, m),
        "score_column": lambda: kernels.score_column(G, H, c1, c2, 5.0, 30.0, signs, k),
        "nearest_center": lambda: kernels.nearest_center(X, C),
    }


def compare_backends(n=2048, d=256, m=16, k=8, trials=5, seed=0):
    """Median seconds per kernel for each available backend (after a warm-up call)."""
    backends = ["numpy"] + (["numba"] if _backend.HAS_NUMBA else [])
    rows = []
    previous = _backend.get_backend()
    try:
        for name in backends:
            _backend.set_backend(name)
            cases = _kernel_cases(np.random.default_rng(seed), n, d, m, k)
            for kernel, fn in cases.items():
                fn()
                t, _ = median_time(fn, trials)
                rows.append({"kernel": kernel, "backend": name, "median_s": t, "trials": trials})
    finally:
        _backend.set_backend(previous)
    return rows


def format_tsv(rows, columns):
    lines = ["\t".join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            val = row[c]
            cells.append(f"{val:.6g}" if isinstance(val, float) else str(val))
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
