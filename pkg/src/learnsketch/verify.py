"""Seeded experiment checks run by ``learnsketch verify`` and the acceptance tests.

Every check returns a :class:`CheckResult` with a pass/fail verdict and the
measured numbers behind it.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import gen, kmeans, learn, lra, matlin
from .sketch import CountSketch, apply_left, identity_countsketch, random_countsketch, stack


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _seeds(base, count):
    return [int(x) for x in np.random.SeedSequence(base).generate_state(count)]


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _selector(rows, n):
    """CountSketch with one bin per listed row and zero weight elsewhere."""
    p = np.zeros(n, dtype=np.int64)
    v = np.zeros(n)
    p[list(rows)] = np.arange(len(rows))
    v[list(rows)] = 1.0
    return CountSketch(len(rows), n, p, v)


@_timed
def check_remark(tol=1e-9):
    """diag(2,2,sqrt2,sqrt2), k=2: subspace costs 6 and 6, their union 4."""
    A = np.diag([2.0, 2.0, math.sqrt(2), math.sqrt(2)])
    S13, S24 = _selector([0, 2], 4), _selector([1, 3], 4)
    opt = matlin.tail_energy(A, 2)
    c13 = lra.best_rank_k_in_rowspace(A, apply_left(S13, A), 2)[1]
    c24 = lra.best_rank_k_in_rowspace(A, apply_left(S24, A), 2)[1]
    cu = lra.best_rank_k_in_rowspace(A, apply_left(stack(S13, S24), A), 2)[1]
    ok = all(abs(a - b) <= tol for a, b in ((opt, 4), (c13, 6), (c24, 6), (cu, 4)))
    return CheckResult("remark", ok, f"opt={opt:.12g} span13={c13:.12g} span24={c24:.12g} "
                       f"union={cu:.12g}", {"opt": opt, "span13": c13, "span24": c24, "union": cu})


@_timed
def check_monotonicity_lra(trials=100, seed=0, k=3, tol=1e-9):
    """Appending rows to S (or R) never raises the rank-k subspace cost."""
    good_s = good_r = 0
    worst = -np.inf
    for s in _seeds(seed, trials):
        rng = np.random.default_rng(s)
        A = rng.standard_normal((32, 24))
        S, T = random_countsketch(6, 32, rng), random_countsketch(4, 32, rng)
        base = lra.best_rank_k_in_rowspace(A, apply_left(S, A), k)[1]
        ext = lra.best_rank_k_in_rowspace(A, apply_left(stack(S, T), A), k)[1]
        good_s += ext <= base + tol
        R, U = random_countsketch(6, 24, rng), random_countsketch(4, 24, rng)
        base_r = lra.best_rank_k_in_colspace(A, apply_left(R, A.T).T, k)[1]
        ext_r = lra.best_rank_k_in_colspace(A, apply_left(stack(R, U), A.T).T, k)[1]
        good_r += ext_r <= base_r + tol
        worst = max(worst, ext - base, ext_r - base_r)
    ok = good_s == trials and good_r == trials
    return CheckResult("monotonicity-lra", ok,
                       f"rowspace {good_s}/{trials}, colspace {good_r}/{trials}, "
                       f"max increase {worst:.3g}",
                       {"rowspace": good_s, "colspace": good_r, "max_increase": worst})


@_timed
def check_monotonicity_kmeans(trials=100, seed=0, k=4, ratio=1.05):
    """Mean sketched k-means cost with stack(S, T) stays within ``ratio`` of S alone."""
    base, ext = [], []
    for s in _seeds(seed, trials):
        rng = np.random.default_rng(s)
        A, _ = gen.gen_gaussian_clusters(60, 16, k, 6.0, rng)
        S, T = random_countsketch(2 * k, 60, rng), random_countsketch(k, 60, rng)
        base.append(kmeans.sketch_kmeans(A, S, k, seed=s).cost)
        ext.append(kmeans.sketch_kmeans(A, stack(S, T), k, seed=s).cost)
    r = np.mean(ext) / np.mean(base)
    return CheckResult("monotonicity-kmeans", r <= ratio,
                       f"mean stacked/mean base = {r:.4f} (need <= {ratio})",
                       {"ratio": r, "base_mean": float(np.mean(base)),
                        "stacked_mean": float(np.mean(ext))})


def heavy_isolated(S, heavy):
    """Heavy rows sit in distinct bins that no other row uses."""
    heavy = set(heavy)
    bins = [int(S.p[i]) for i in heavy]
    if len(set(bins)) != len(bins):
        return False
    return all(int(S.p[i]) not in bins for i in range(S.n) if i not in heavy)


@_timed
def check_spiked_separation(seeds=10, seed=0, n=32, d=4096, s=6, ell=16.0, k=8,
                            train=4, randoms=20, need=0.9):
    """Greedy isolates heavy rows, stays within 1.01 (n - s), and random is >= 1.2x worse."""
    bound = 1.01 * (n - s)
    wins = 0
    rows = []
    for ds in _seeds(seed, seeds):
        member_seeds = _seeds(ds, train + 1 + randoms)
        params = gen.SpikedParams(n, d, s, ell)
        Tr = learn.TrainSet(tuple(gen.gen_spiked(params.with_seed(x)) for x in member_seeds[:train]))
        A = gen.gen_spiked(params.with_seed(member_seeds[train]))
        S = learn.greedy_positions(Tr, learn.GreedyConfig(m=k, k=k))
        g = learn.proxy_loss(S, A, k)
        rnd = float(np.mean([learn.proxy_loss(random_countsketch(k, n, x), A, k)
                             for x in member_seeds[train + 1:]]))
        iso = heavy_isolated(S, params.heavy_indices)
        ok = iso and g <= bound and rnd >= 1.2 * g
        wins += ok
        rows.append({"greedy": g, "random_mean": rnd, "isolated": iso, "ok": ok})
    gmax = max(r["greedy"] for r in rows)
    rmin = min(r["random_mean"] / r["greedy"] for r in rows)
    return CheckResult("spiked-separation", wins >= math.ceil(need * seeds),
                       f"{wins}/{seeds} seeds ok; max greedy {gmax:.3f} (bound {bound:.2f}), "
                       f"min random/greedy {rmin:.2f} (need 1.2)",
                       {"wins": wins, "per_seed": rows, "bound": bound})


@_timed
def check_zipf_separation(seeds=10, seed=0, h_n=4, d=64, h_k=2, train=4, randoms=50,
                          ratio=1.05, need=0.9):
    """Greedy loss < n^2 / 2^(h_k-2) and mean random loss >= ratio times that bound."""
    n = gen.zipf_rows(h_n)
    k = 2 * (2 ** (h_k + 1) - 1)
    bound = n * n / 2.0 ** (h_k - 2)
    greedy_wins = random_wins = wins = 0
    rows = []
    for ds in _seeds(seed, seeds):
        member_seeds = _seeds(ds, train + 1 + randoms)
        Tr = learn.TrainSet(tuple(gen.gen_zipf(gen.ZipfParams(h_n, d, x))
                                  for x in member_seeds[:train]))
        A = gen.gen_zipf(gen.ZipfParams(h_n, d, member_seeds[train]))
        S = learn.greedy_positions(Tr, learn.GreedyConfig(m=k, k=k))
        g = learn.proxy_loss(S, A, k)
        rnd = float(np.mean([learn.proxy_loss(random_countsketch(k, n, x), A, k)
                             for x in member_seeds[train + 1:]]))
        greedy_wins += g < bound
        random_wins += rnd >= ratio * bound
        wins += g < bound and rnd >= ratio * bound
        rows.append({"greedy": g, "random_mean": rnd})
    rnd_mean = float(np.mean([r["random_mean"] for r in rows]))
    g_max = max(r["greedy"] for r in rows)
    return CheckResult(
        "zipf-separation", wins >= math.ceil(need * seeds),
        f"greedy {g_max:.1f} < {bound:.0f} in {greedy_wins}/{seeds}; random mean {rnd_mean:.1f}, "
        f"ratio to bound {rnd_mean / bound:.3f} (need >= {ratio}) in {random_wins}/{seeds}",
        {"bound": bound, "greedy_wins": greedy_wins, "random_wins": random_wins,
         "random_ratio": rnd_mean / bound, "greedy_ratio": g_max / bound, "per_seed": rows})


@_timed
def check_sketch_lowrank(seeds=50, seed=0, n=64, d=48, k=4, ratio=1.5):
    """Median Algorithm-1 cost <= ratio x optimum; lossless sketches reproduce rank-k input."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    opt = matlin.tail_energy(A, k)
    costs = []
    for s in _seeds(seed, seeds):
        sk = lra.classical_sketch_set(n, d, k, seed=s)
        costs.append(lra.lra_cost(A, lra.sketch_lowrank(A, sk, k)))
    med = float(np.median(costs)) / opt
    low = rng.standard_normal((n, k)) @ rng.standard_normal((k, d))
    ident = lra.LraSketchSet(identity_countsketch(n), identity_countsketch(d),
                             identity_countsketch(n), identity_countsketch(d))
    lossless = lra.lra_cost(low, lra.sketch_lowrank(low, ident, k))
    ok = med <= ratio and lossless <= 1e-9
    return CheckResult("sketch-lowrank", ok,
                       f"median cost/opt {med:.4f} (need <= {ratio}); lossless cost {lossless:.2e}",
                       {"median_ratio": med, "lossless_cost": lossless})


def _best_random_candidate(C, D, G, k, count, rng):
    a, b = C.shape[1], D.shape[0]
    ZL = rng.standard_normal((count, a, k))
    ZR = rng.standard_normal((count, k, b))
    R = C @ (ZL @ ZR) @ D - G
    return float(np.min(np.einsum("cij,cij->c", R, R)))


@_timed
def check_small_solver(instances=20, seed=0, candidates=10_000, k=2):
    """Rank-k solver beats random rank-k candidates and is exact on representable targets."""
    beaten = 0
    worst_exact = 0.0
    for s in _seeds(seed, instances):
        rng = np.random.default_rng(s)
        C, D, G = rng.standard_normal((6, 4)), rng.standard_normal((3, 5)), rng.standard_normal((6, 5))
        res = lra.solve_small_rank_k(C, D, G, k).residual
        best = min(_best_random_candidate(C, D, G, k, 2500, rng) for _ in range(candidates // 2500))
        beaten += res <= best + 1e-9
        W = rng.standard_normal((4, k)) @ rng.standard_normal((k, 3))
        worst_exact = max(worst_exact, lra.solve_small_rank_k(C, D, C @ W @ D, k).residual)
    ok = beaten == instances and worst_exact <= 1e-9
    return CheckResult("small-solver", ok,
                       f"optimal vs {candidates} candidates in {beaten}/{instances}; "
                       f"max representable residual {worst_exact:.2e}",
                       {"beaten": beaten, "worst_exact": worst_exact})


def lowrank_signal(n, d, r, noise, rng):
    return rng.standard_normal((n, r)) @ rng.standard_normal((r, d)) + noise * rng.standard_normal((n, d))


@_timed
def check_approxcheck(seeds=100, seed=0, m_prime=64, k=4, need_lra=0.9):
    """A learned sketch with zeroed values loses to the classical one in both ApproxChecks."""
    lra_wins = km_wins = 0
    for s in _seeds(seed, seeds):
        rng = np.random.default_rng(s)
        A = lowrank_signal(64, 48, k, 0.1, rng)
        classical = lra.classical_sketch_set(64, 48, k, seed=s)
        S = classical.S
        learned = classical.replace(S=CountSketch(S.m, S.n, S.p, np.zeros(S.n)))
        _, label = lra.approx_check_lra(A, learned, classical, k, m_prime, seed=s + 1)
        lra_wins += label == lra.CLASSICAL
        X, _ = gen.gen_gaussian_clusters(200, 32, k, 8.0, rng)
        SC = random_countsketch(8 * k, 200, rng)
        SL = CountSketch(SC.m, SC.n, SC.p, np.zeros(SC.n))
        _, label = kmeans.approx_check_kmeans(X, SL, SC, k, seed=s)
        km_wins += label == kmeans.CLASSICAL
    need_lra = math.ceil(need_lra * seeds)
    ok = lra_wins >= need_lra and km_wins == seeds
    return CheckResult("approxcheck", ok,
                       f"classical chosen: LRA {lra_wins}/{seeds} (need {need_lra}), "
                       f"k-means {km_wins}/{seeds} (need {seeds})",
                       {"lra": lra_wins, "kmeans": km_wins})


@_timed
def check_learning_order(seeds=10, seed=0, n=32, d=1024, s=6, ell=16.0, k=8, train=8, test=2,
                         value_steps=200, step_size=0.1, gap=0.2):
    """Mean test proxy loss: ours <= ivy19 <= classical, ours at least ``gap`` below classical."""
    totals = {"ours": [], "ivy19": [], "classical": []}
    for ds in _seeds(seed, seeds):
        member = _seeds(ds, train + test + 1)
        params = gen.SpikedParams(n, d, s, ell)
        mats = [gen.gen_spiked(params.with_seed(x)) for x in member[:train + test]]
        Tr, tests = learn.TrainSet(tuple(mats[:train])), mats[train:]
        sk_seed = member[-1]
        cand = {
            "ours": learn.train_pipeline(Tr, learn.GreedyConfig(m=k, k=k), value_steps, step_size),
            "ivy19": learn.ivy19_baseline(Tr, k, k, sk_seed, value_steps, step_size),
            "classical": random_countsketch(k, n, sk_seed),
        }
        for name, S in cand.items():
            totals[name].append(np.mean([learn.proxy_loss(S, A, k) for A in tests]))
    mean = {name: float(np.mean(v)) for name, v in totals.items()}
    ok = (mean["ours"] <= mean["ivy19"] <= mean["classical"]
          and mean["ours"] <= (1 - gap) * mean["classical"])
    return CheckResult("learning-order", ok,
                       f"ours {mean['ours']:.3f}, ivy19 {mean['ivy19']:.3f}, "
                       f"classical {mean['classical']:.3f}; ours/classical "
                       f"{mean['ours'] / mean['classical']:.3f} (need <= {1 - gap:.2f})", mean)


@_timed
def check_frobenius(seeds=200, seed=0, eps=0.5):
    """||S A||_F^2 within (1 +- eps) ||A||_F^2 for at least 2/3 of classical sketches."""
    m = math.ceil(1 / eps ** 2)
    A = np.random.default_rng(seed).standard_normal((64, 32))
    ref = matlin.frob2(A)
    hits = sum(abs(matlin.frob2(apply_left(random_countsketch(m, 64, x), A)) / ref - 1) <= eps
               for x in _seeds(seed, seeds))
    return CheckResult("frobenius", hits >= 2 * seeds / 3,
                       f"m={m}: {hits}/{seeds} within 1+-{eps} (need >= {math.ceil(2 * seeds / 3)})",
                       {"hits": hits, "m": m})


def grad_check(rng, n=10, d=7, m=4, k=2):
    """Max relative error of the analytic value gradient against central differences."""
    A = rng.standard_normal((n, d))
    S = random_countsketch(m, n, rng)
    p = np.asarray(S.p)
    v = rng.standard_normal(n)
    _, g = learn.proxy_value_and_grad(A, p, v, m, k)
    fd = np.empty(n)
    for i in range(n):
        h = 1e-5 * (1 + abs(v[i]))
        e = np.zeros(n)
        e[i] = h
        fd[i] = (learn.proxy_value_and_grad(A, p, v + e, m, k)[0]
                 - learn.proxy_value_and_grad(A, p, v - e, m, k)[0]) / (2 * h)
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-300))


@_timed
def check_hygiene(seed=0, runs=50, grad_instances=20):
    """Factorization oracles, non-increasing value traces and the gradient check."""
    rng = np.random.default_rng(seed)
    problems = []
    for _ in range(10):
        A = rng.standard_normal((7, 5))
        res = matlin.svd(A)
        ev = np.sqrt(np.clip(np.linalg.eigvalsh(A.T @ A)[::-1], 0, None))
        if np.max(np.abs(res.sigma - ev)) > 1e-8:
            problems.append("svd spectrum")
        if np.linalg.norm(res.reconstruct() - A) > 1e-8 * np.linalg.norm(A):
            problems.append("svd reconstruction")
        Q, R = matlin.qr(rng.standard_normal((8, 3)))
        if np.max(np.abs(Q.T @ Q - np.eye(3))) > 1e-10:
            problems.append("qr orthonormality")
        B = rng.standard_normal((5, 3))
        P = matlin.pseudo_inverse(B)
        for lhs, rhs in ((B @ P @ B, B), (P @ B @ P, P), ((B @ P).T, B @ P), ((P @ B).T, P @ B)):
            if np.max(np.abs(lhs - rhs)) > 1e-8:
                problems.append("penrose")
                break
    bad_traces = 0
    for s in _seeds(seed, runs):
        r = np.random.default_rng(s)
        mats = tuple(r.standard_normal((12, 9)) for _ in range(2))
        S = random_countsketch(4, 12, r)
        _, trace = learn.optimize_values(mats, S.p, S.v, 2, steps=15, m=4)
        bad_traces += any(b > a for a, b in zip(trace, trace[1:]))
    gerr = max(grad_check(np.random.default_rng(s)) for s in _seeds(seed + 1, grad_instances))
    ok = not problems and bad_traces == 0 and gerr <= 1e-4
    return CheckResult("hygiene", ok,
                       f"factorization issues {len(set(problems))}, increasing traces "
                       f"{bad_traces}/{runs}, max gradient rel. error {gerr:.2e}",
                       {"problems": sorted(set(problems)), "bad_traces": bad_traces,
                        "grad_rel_err": gerr})


CHECKS = {
    "remark": check_remark,
    "monotonicity-lra": check_monotonicity_lra,
    "monotonicity-kmeans": check_monotonicity_kmeans,
    "spiked-separation": check_spiked_separation,
    "zipf-separation": check_zipf_separation,
    "sketch-lowrank": check_sketch_lowrank,
    "small-solver": check_small_solver,
    "approxcheck": check_approxcheck,
    "learning-order": check_learning_order,
    "frobenius": check_frobenius,
    "hygiene": check_hygiene,
}

# name of the repetition-count argument of each check, for ``verify --trials``
TRIALS_ARG = {
    "monotonicity-lra": "trials",
    "monotonicity-kmeans": "trials",
    "spiked-separation": "seeds",
    "zipf-separation": "seeds",
    "sketch-lowrank": "seeds",
    "small-solver": "instances",
    "approxcheck": "seeds",
    "learning-order": "seeds",
    "frobenius": "seeds",
    "hygiene": "runs",
}


def run_check(name, trials=None, seed=0):
    fn = CHECKS[name]
    kwargs = {}
    if name != "remark":
        kwargs["seed"] = seed
    if trials is not None and name in TRIALS_ARG:
        kwargs[TRIALS_ARG[name]] = trials
    return fn(**kwargs)
