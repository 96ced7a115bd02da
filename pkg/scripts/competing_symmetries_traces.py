"""Traces of f_n = (R U)^n f for a seeded zonal corpus; one CSV block per function."""
import argparse
import sys

from sobstab.corpora import zonal_corpus
from sobstab.flows import competing_symmetries_run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--count", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n-max", type=int, default=40)
    ap.add_argument("--tol", type=float, default=0.01)
    args = ap.parse_args()
    for i, F in enumerate(zonal_corpus(args.count, args.d, args.seed, axis="p")):
        tr = competing_symmetries_run(F, n_max=args.n_max, tol=args.tol)
        sys.stdout.write(f"# function {i}, converged={tr.converged}\n")
        sys.stdout.write(tr.to_csv())
        sys.stdout.flush()


if __name__ == "__main__":
    main()
