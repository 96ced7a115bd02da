"""Stability ratio of 1 + eps * Y_2 as eps -> 0, against 4/(d+4)."""
import argparse
import csv
import sys

import numpy as np

from sobstab.manifold import preset_perturbed_optimizer, stability_ratio


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+", default=[3, 4, 6])
    ap.add_argument("--eps", type=float, nargs="+", default=list(np.logspace(-1, -3, 7)))
    ap.add_argument("--degree", type=int, default=2)
    args = ap.parse_args()
    w = csv.writer(sys.stdout)
    w.writerow(["d", "eps", "ratio", "target", "relative_gap"])
    for d in args.dims:
        target = 4.0 / (d + 4)
        for e in args.eps:
            r = stability_ratio(preset_perturbed_optimizer(d, e, args.degree))
            w.writerow([d, f"{e:.3e}", repr(r), repr(target), f"{abs(r / target - 1):.3e}"])


if __name__ == "__main__":
    main()
