#!/usr/bin/env python3
"""Compare the numba and numpy cascade backends across problem sizes.

Builds one basis per size (uniform 1d Diracs, epsilon graph, q = 2) and times
the forward and inverse transforms under both backends, printing a table and
the fitted log-log scaling exponent of each column.
"""

import argparse

from samplets import HAS_NUMBA
from samplets.bench import fit_exponent, scaling_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+",
                    default=[2**k for k in range(10, 17)])
    ap.add_argument("--degree", type=int, default=2)
    ap.add_argument("--leaf-max", type=int, default=32)
    args = ap.parse_args()

    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    runs = {b: scaling_run(args.sizes, args.degree, args.leaf_max, backend=b)
            for b in backends}

    head = f"{'n':>8}"
    for b in backends:
        head += f" {b + ' fwd (s)':>16} {b + ' inv (s)':>16}"
    print(head)
    for i, n in enumerate(args.sizes):
        line = f"{n:>8}"
        for b in backends:
            p = runs[b][i]
            line += f" {p.forward_s:>16.3e} {p.inverse_s:>16.3e}"
        print(line)
    print()
    for b in backends:
        fwd = fit_exponent(args.sizes, [p.forward_s for p in runs[b]])
        inv = fit_exponent(args.sizes, [p.inverse_s for p in runs[b]])
        print(f"{b}: forward exponent {fwd:.3f}, inverse exponent {inv:.3f}")
    if len(backends) == 2:
        big = args.sizes[-1]
        speed = runs["numpy"][-1].forward_s / runs["numba"][-1].forward_s
        print(f"numba speedup at n = {big}: {speed:.1f}x forward")


if __name__ == "__main__":
    main()
