"""Deficit, distance and their ratio on a seeded zonal corpus, with the closed-form/direct distance gap."""
import argparse
import csv
import sys

from sobstab.corpora import zonal_corpus
from sobstab.manifold import direct_distance, manifold_distance, sobolev_deficit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+", default=[3, 4, 6])
    ap.add_argument("--count", type=int, default=6, help="functions per dimension and sign class")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--direct", action="store_true", help="also run the direct minimization")
    args = ap.parse_args()
    w = csv.writer(sys.stdout)
    w.writerow(["d", "signed", "index", "deficit", "dist2", "ratio", "direct_gap"])
    for d in args.dims:
        for signed in (False, True):
            for i, F in enumerate(zonal_corpus(args.count, d, args.seed + d, signed)):
                rep, dist = sobolev_deficit(F), manifold_distance(F)
                gap = ""
                if args.direct:
                    gap = f"{abs(direct_distance(F, dist).dist2 - dist.dist2) / dist.dist2:.2e}"
                w.writerow([d, int(signed), i, repr(rep.deficit), repr(dist.dist2),
                            f"{rep.deficit / dist.dist2:.6f}", gap])
                sys.stdout.flush()


if __name__ == "__main__":
    main()
