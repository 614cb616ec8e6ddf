"""Sample the MTW tensor of the smooth costs and print their classifications.

    python3 scripts/mtw_scan.py --samples 500
"""

import argparse

from crosscurve.mtw import nncc_scan
from crosscurve.families import scan_setup

COSTS = ("quadratic", "sphere", "log_distance", "norm4", "quartic")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--samples", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--costs", nargs="*", default=list(COSTS))
    args = parser.parse_args()

    print(f"{'cost':<14}{'min S':>14}{'min S (A=0)':>16}{'n(A=0)':>8}  classification")
    for name in args.costs:
        c, region = scan_setup(name)
        summary = nncc_scan(c, region, n_samples=args.samples, seed=args.seed)
        print(f"{name:<14}{summary.min_S:>14.4g}{summary.min_S_orthogonal:>16.4g}{summary.n_orthogonal:>8d}  {summary.classification}")


if __name__ == "__main__":
    main()
