"""Z_d^(2/d) -> e/4 and the deficit of u f_* against e times the log-Sobolev deficit of u."""
import argparse
import sys

from sobstab import logsob as L


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dims", type=int, nargs="+", default=[10, 20, 40, 60, 120, 240])
    ap.add_argument("--R", type=float, default=0.3, help="support radius of the bump")
    ap.add_argument("--tilt", type=float, default=0.2)
    args = ap.parse_args()
    sys.stdout.write(L.zd_sweep([5, 10, 50, 100, 500, 1000]).to_csv())
    sweep = L.ansatz_deficit_sweep(L.bump_preset(args.R, args.tilt), args.dims)
    sys.stdout.write(sweep.to_csv())
    for d, g in zip(sweep.d, sweep.extra["gradient_identity_gap"]):
        sys.stdout.write(f"# d={d} gradient identity gap {g:.2e}\n")


if __name__ == "__main__":
    main()
