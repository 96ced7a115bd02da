"""Gaussian log-Sobolev deficits and distances to c exp(b.x) on a random mixture corpus."""
import argparse
import csv
import sys

from sobstab import logsob as L


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--signed", action="store_true")
    args = ap.parse_args()
    w = csv.writer(sys.stdout)
    w.writerow(["index", "N", "deficit", "rhs", "ratio", "rhs_agreement", "split_residual"])
    for i, u in enumerate(L.random_corpus(args.count, args.seed, args.signed)):
        D = L.logsob_deficit(u)
        res = L.logsob_rhs_inf(u)
        split = L.split_sign_logsob(u).residual if args.signed else ""
        ratio = D / res.value if res.value > 0 else float("nan")
        w.writerow([i, u.N, repr(D), repr(res.value), f"{ratio:.4f}", f"{res.agreement:.1e}", split])


if __name__ == "__main__":
    main()
