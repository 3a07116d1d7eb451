"""``learnsketch`` command line: gen | train | eval | verify | bench.

Every subcommand accepts ``--config FILE``, a JSON object whose keys are the
option names with dashes replaced by underscores (``{"value_steps": 50}``).
Explicit flags override the file.  ``LS_THREADS`` bounds numba's thread pool.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _backend, bench, formats, gen, kmeans, learn, lra, matlin
from . import sketch as sk
from .matlin import InvalidInputError

logger = logging.getLogger("learnsketch")

TASKS = ("lra", "kmeans")
KMEANS_OPT_RUNS = 20


class CliError(Exception):
    pass


# --------------------------------------------------------------------------
# data directories


def member_seeds(seed, count):
    return [int(x) for x in np.random.SeedSequence(seed).generate_state(count)]


def generate(args):
    """Return (distribution params dict, list of (split, seed, matrix))."""
    total = args.train + args.test
    seeds = member_seeds(args.seed, total)
    splits = ["train"] * args.train + ["test"] * args.test
    if args.distribution == "spiked":
        heavy = None if args.heavy is None else tuple(int(x) for x in args.heavy.split(","))
        params = gen.SpikedParams(args.n, args.d, args.s, args.ell, heavy)
        mats = [gen.gen_spiked(params.with_seed(x)) for x in seeds]
        info = params.to_dict()
        info.pop("seed")
    elif args.distribution == "zipf":
        params = gen.ZipfParams(args.h_n, args.d)
        mats = [gen.gen_zipf(params.with_seed(x)) for x in seeds]
        info = {"h_n": args.h_n, "d": args.d, "n": params.n}
    else:
        mats = [gen.gen_gaussian_clusters(args.n, args.d, args.k, args.separation, x)[0]
                for x in seeds]
        info = {"n": args.n, "d": args.d, "k": args.k, "separation": args.separation}
    return info, list(zip(splits, seeds, mats))


def cmd_gen(args):
    out = Path(args.out)
    if args.train < 0 or args.test < 0 or args.train + args.test == 0:
        raise CliError("need at least one matrix (--train/--test)")
    info, members = generate(args)
    entries = {"train": [], "test": []}
    for split, seed, A in members:
        folder = out / split
        folder.mkdir(parents=True, exist_ok=True)
        name = f"{split}/{len(entries[split]):04d}.lskm"
        formats.write_matrix(out / name, A)
        entries[split].append({"file": name, "seed": seed})
    manifest = {"format": "lskm-v1", "distribution": args.distribution, "params": info,
                "seed": args.seed, "train": entries["train"], "test": entries["test"]}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(members)} matrices and manifest.json to {out}")
    return 0


def load_split(data, split):
    """Matrices of one split from a generated directory (manifest) or a plain folder."""
    root = Path(data)
    manifest = root / "manifest.json"
    if manifest.exists():
        files = [root / e["file"] for e in json.loads(manifest.read_text())[split]]
    else:
        folder = root / split if (root / split).is_dir() else root
        files = sorted(p for p in folder.iterdir() if p.suffix.lower() in (".lskm", ".csv"))
    if not files:
        raise CliError(f"no {split} matrices under {root}")
    return [formats.load_any(f) for f in files]


# --------------------------------------------------------------------------
# sketch bundles


def write_bundle(path, bundle):
    out = {key: (sk.to_dict(val) if key in ("S", "R") else val) for key, val in bundle.items()}
    Path(path).write_text(json.dumps(out) + "\n")


def read_bundle(path):
    obj = json.loads(Path(path).read_text())
    for key in ("S", "R"):
        if key in obj:
            obj[key] = sk.from_dict(obj[key])
    if obj.get("task") not in TASKS or "S" not in obj:
        raise CliError(f"{path}: not a sketch bundle")
    if obj["task"] == "lra" and "R" not in obj:
        raise CliError(f"{path}: LRA bundle without R")
    return obj


def cmd_train(args):
    mats = load_split(args.data, "train")
    Tr = learn.TrainSet(tuple(mats))
    m_r = args.m_r or args.m
    s_seed, r_seed = member_seeds(args.seed, 2)
    kw = dict(value_steps=args.value_steps, step_size=args.step_size)
    S, s_trace = _train_side(args, Tr, args.m, s_seed, learn.ROWSPACE, **kw)
    bundle = {"task": args.task, "method": args.method, "k": args.k, "S": S}
    traces = [("S", s_trace)]
    if args.task == "lra":
        R, r_trace = _train_side(args, Tr, m_r, r_seed, learn.COLSPACE, **kw)
        bundle["R"] = R
        traces.append(("R", r_trace))
    write_bundle(args.out, bundle)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("sketch\tstep\tloss\n")
            for name, trace in traces:
                for step, loss in enumerate(trace):
                    fh.write(f"{name}\t{step}\t{loss!r}\n")
    print(f"trained {args.method} sketch for {args.task} -> {args.out}")
    return 0


def _train_side(args, Tr, m, seed, proxy, value_steps, step_size):
    if args.method == "ours":
        cfg = learn.GreedyConfig(m=m, k=args.k, ordering=args.ordering, signs=args.signs,
                                 proxy=proxy, seed=seed)
        S, traces = learn.train_pipeline(Tr, cfg, value_steps, step_size, return_trace=True)
    else:
        S, traces = bench.build_sketch(args.method, Tr, m, args.k, seed, value_steps, step_size,
                                       proxy)
    trace = traces["values"] or [learn.mean_proxy_loss(S, Tr, args.k, proxy)]
    return S, trace


# --------------------------------------------------------------------------
# evaluation


def delta_lra(A, bundle, k, seed, m_v=None, m_w=None):
    S, R = bundle["S"], bundle["R"]
    m_s, m_r = sk.sketch_rows(S), sk.sketch_rows(R)
    vw = lra.classical_sketch_set(A.shape[0], A.shape[1], k, seed=seed, m_S=m_s, m_R=m_r,
                                  m_V=m_v, m_W=m_w)
    F = lra.sketch_lowrank(A, vw.replace(S=S, R=R), k)
    return lra.lra_cost(A, F) - matlin.tail_energy(A, k)


def kmeans_surrogate_optimum(A, k, seed):
    return min(kmeans.lloyd_kmeanspp(A, k, seed=x).cost for x in member_seeds(seed, KMEANS_OPT_RUNS))


def delta_kmeans(A, bundle, k, seed, **_):
    cost = kmeans.sketch_kmeans(A, bundle["S"], k, seed=seed).cost
    return cost - kmeans_surrogate_optimum(A, k, seed)


def cmd_eval(args):
    tests = load_split(args.data, "test")
    rows = []
    for path in args.sketch:
        bundle = read_bundle(path)
        task = bundle["task"]
        k = args.k or bundle["k"]
        deltas = []
        for idx, A in enumerate(tests):
            seed = member_seeds(args.seed, len(tests))[idx]
            fn = delta_lra if task == "lra" else delta_kmeans
            try:
                deltas.append(fn(A, bundle, k, seed, m_v=args.m_v, m_w=args.m_w))
            except InvalidInputError as exc:
                raise CliError(f"{path}: {exc}") from None
        n, d = tests[0].shape
        rows.append({
            "task": task, "n": n, "d": d, "k": k, "m": sk.sketch_rows(bundle["S"]),
            "method": bundle["method"], "mean_delta": float(np.mean(deltas)),
            "std_delta": float(np.std(deltas)), "tests": len(deltas),
            "optimum": "truncated-svd" if task == "lra" else
            f"best-of-{KMEANS_OPT_RUNS}-lloyd (surrogate)",
        })
    text = bench.format_tsv(rows, ["task", "n", "d", "k", "m", "method", "mean_delta",
                                   "std_delta", "tests", "optimum"])
    _emit(text, args.out)
    return 0


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


# --------------------------------------------------------------------------
# verify / bench


def cmd_verify(args):
    from . import verify

    names = args.check or list(verify.CHECKS)
    unknown = [n for n in names if n not in verify.CHECKS]
    if unknown:
        raise CliError(f"unknown check(s) {unknown}; choose from {sorted(verify.CHECKS)}")
    failed = 0
    results = []
    for name in names:
        res = verify.run_check(name, trials=args.trials, seed=args.seed)
        print(res.line(), flush=True)
        failed += not res.passed
        results.append({"name": res.name, "passed": res.passed, "detail": res.detail,
                        "seconds": res.seconds})
    if args.json:
        Path(args.json).write_text(json.dumps(results, indent=2) + "\n")
    print(f"{len(names) - failed}/{len(names)} checks passed")
    return 1 if failed else 0


def cmd_bench(args):
    if args.kernels:
        rows = bench.compare_backends(args.n, args.d, args.m, args.k, args.trials, args.seed)
        _emit(bench.format_tsv(rows, ["kernel", "backend", "median_s", "trials"]), args.out)
        return 0
    seeds = member_seeds(args.seed, args.train + 1)
    params = gen.SpikedParams(args.n, args.d, min(args.k - 1, args.n - 1) or 0, 4.0)
    Tr = learn.TrainSet(tuple(gen.gen_spiked(params.with_seed(x)) for x in seeds[:-1]))
    A = gen.gen_spiked(params.with_seed(seeds[-1]))
    rows = bench.time_methods(Tr, A, args.m, args.k, args.methods, args.trials, args.seed,
                              args.value_steps, args.step_size)
    _emit(bench.format_tsv(rows, ["method", "offline_s", "online_s", "trials"]), args.out)
    return 0


# --------------------------------------------------------------------------
# parser


def _signs(text):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"signs must look like '1,-1', got {text!r}") from None
    return vals


def build_parser():
    ap = argparse.ArgumentParser(prog="learnsketch", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv: debug)")
    sub = ap.add_subparsers(dest="command", required=True)
    parsers = {}

    def add(name, help_, func):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", help="JSON file with option defaults")
        p.set_defaults(func=func)
        parsers[name] = p
        return p

    p = add("gen", "write seeded train/test matrices plus a manifest", cmd_gen)
    p.add_argument("distribution", choices=("spiked", "zipf", "clusters"))
    p.add_argument("--n", type=int, default=32, help="rows (spiked, clusters)")
    p.add_argument("--d", type=int, default=4096)
    p.add_argument("--s", type=int, default=6, help="heavy rows (spiked)")
    p.add_argument("--ell", type=float, default=16.0, help="heavy row norm (spiked)")
    p.add_argument("--heavy", help="comma-separated heavy row indices, 0-based (spiked)")
    p.add_argument("--h-n", type=int, default=4, help="level count (zipf)")
    p.add_argument("--k", type=int, default=4, help="clusters (clusters)")
    p.add_argument("--separation", type=float, default=10.0, help="center distance (clusters)")
    p.add_argument("--train", type=int, default=8)
    p.add_argument("--test", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = add("train", "learn or build a sketch from the training split", cmd_train)
    p.add_argument("--task", choices=TASKS, default="lra")
    p.add_argument("--method", choices=bench.METHODS, default="ours")
    p.add_argument("--data", required=True, help="directory written by 'gen' (or with train/)")
    p.add_argument("--m", type=int, required=True, help="rows of S")
    p.add_argument("--m-r", type=int, default=None, help="rows of R for LRA (default: --m)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--ordering", choices=learn.ORDERINGS, default="nonincreasing-norm")
    p.add_argument("--signs", type=_signs, default=(1.0, -1.0), help="e.g. '1,-1' or '1'")
    p.add_argument("--value-steps", type=int, default=200)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="sketch bundle JSON")
    p.add_argument("--trace", help="training trace TSV")

    p = add("eval", "report mean/std of (achieved - optimal) cost on the test split", cmd_eval)
    p.add_argument("--data", required=True)
    p.add_argument("--sketch", nargs="+", required=True, help="bundle files, one per method")
    p.add_argument("--k", type=int, default=None, help="override the bundle's k")
    p.add_argument("--m-v", type=int, default=None, help="rows of classical V (LRA)")
    p.add_argument("--m-w", type=int, default=None, help="rows of classical W (LRA)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report TSV (also printed)")

    p = add("verify", "run the built-in property and separation checks", cmd_verify)
    p.add_argument("--check", action="append", help="check name (repeatable); default all")
    p.add_argument("--trials", type=int, default=None, help="override repetition count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", help="write results as JSON")

    p = add("bench", "time offline training and online solving per method", cmd_bench)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--d", type=int, default=256)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--train", type=int, default=2)
    p.add_argument("--methods", nargs="+", choices=bench.METHODS, default=list(bench.METHODS))
    p.add_argument("--value-steps", type=int, default=20)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kernels", action="store_true", help="compare numba and numpy kernels")
    p.add_argument("--out", help="TSV output (also printed)")
    return ap, parsers


def _apply_config(parsers, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = json.loads(Path(known.config).read_text())
    if not isinstance(cfg, dict):
        raise CliError("config file must hold a JSON object")
    cmd = next((a for a in argv if a in parsers), None)
    if cmd is None:
        return
    parser = parsers[cmd]
    valid = {a.dest for a in parser._actions}
    bad = sorted(set(cfg) - valid)
    if bad:
        raise CliError(f"unknown config keys for {cmd}: {bad}")
    if "signs" in cfg and not isinstance(cfg["signs"], str):
        cfg["signs"] = tuple(float(x) for x in cfg["signs"])
    for action in parser._actions:
        if action.dest in cfg and action.required:
            action.required = False
    parser.set_defaults(**cfg)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    ap, parsers = build_parser()
    try:
        _apply_config(parsers, argv)
        args = ap.parse_args(argv)
        level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
        _backend.configure_threads()
        logger.info("kernel backend: %s", _backend.get_backend())
        return args.func(args)
    except (CliError, InvalidInputError, OSError, json.JSONDecodeError) as exc:
        print(f"learnsketch: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
