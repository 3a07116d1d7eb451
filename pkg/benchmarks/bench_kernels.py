"""Compare the numba and pure-numpy kernel backends.

    python benchmarks/bench_kernels.py [--n 2048] [--d 256] [--m 16] [--trials 5]
"""

import argparse
import sys

from learnsketch.bench import compare_backends, format_tsv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2048)
    ap.add_argument("--d", type=int, default=256)
    ap.add_argument("--m", type=int, default=16)
    ap.add_argument("--k", type=int, default=8)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rows = compare_backends(args.n, args.d, args.m, args.k, args.trials, args.seed)
    sys.stdout.write(format_tsv(rows, ["kernel", "backend", "median_s", "trials"]))
    by = {(r["kernel"], r["backend"]): r["median_s"] for r in rows}
    for kernel in sorted({r["kernel"] for r in rows}):
        if (kernel, "numba") in by:
            print(f"# {kernel}: numpy/numba = {by[kernel, 'numpy'] / by[kernel, 'numba']:.1f}x")


if __name__ == "__main__":
    main()
