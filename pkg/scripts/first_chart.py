"""Ratio of the first-chart integral to its leading term over a lambda range.

    python scripts/first_chart.py [--k 3 4] [--lam-lo 1e2 --decades 5]
"""
import argparse
import math

import numpy as np

from degentrace._quad import bump
from degentrace.fiber import eval_first_chart, first_chart_leading, lambda_grid
from degentrace.mellin import mellin_transform


def f_hat(x):
    return math.sqrt(math.pi) * np.exp(-np.asarray(x) ** 2 / 4)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, nargs="+", default=[3, 4])
    ap.add_argument("--lam-lo", type=float, default=1e2)
    ap.add_argument("--decades", type=float, default=5.0)
    args = ap.parse_args()
    lams = lambda_grid(args.lam_lo, args.decades, 2)
    for k in args.k:
        c0 = first_chart_leading(mellin_transform(f_hat, 1 / k).real, float(bump(0.0)), k)
        print(f"k={k}  c0={c0:.12f}")
        for lam in lams:
            r = eval_first_chart(lam, f_hat, bump, k).value * lam ** (1 / k) / c0
            print(f"  lam={lam:10.3e}  ratio={r:.8f}  ratio-1={r - 1:+.2e}")


if __name__ == "__main__":
    main()
