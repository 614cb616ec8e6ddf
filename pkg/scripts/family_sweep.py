"""Run every chord check on every registered family and tabulate the worst gaps.

    python3 scripts/family_sweep.py --trials 10 --n-y 32 > sweep.csv
"""

import argparse
import csv
import sys

import numpy as np

from crosscurve.core import VerifierConfig, conv_check, lmp_check, merge_reports, nncc_check
from crosscurve.errors import CrosscurveError
from crosscurve.families import FAMILIES, make_family

CHECKS = {"nncc": nncc_check, "lmp": lmp_check, "conv": conv_check}


def sweep(name: str, trials: int, n_y: int, seed: int) -> dict:
    fam = make_family({"family": name})
    rng = np.random.default_rng(seed)
    segments = []
    for _ in range(trials):
        try:
            segments.append(fam.random_segment(rng))
        except CrosscurveError:
            continue  # e.g. a sphere triple on the cut locus
    row = {"family": name, "segments": len(segments)}
    for kind, check in CHECKS.items():
        reports = []
        for t, seg in enumerate(segments):
            try:
                reports.append(check(seg, fam.cost, VerifierConfig(n_y=n_y, seed=seed + 1 + t)))
            except CrosscurveError:
                continue
        row[kind] = merge_reports(reports).max_gap if reports else float("nan")
    return row


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--n-y", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--families", nargs="*", default=sorted(FAMILIES))
    args = parser.parse_args()

    writer = csv.DictWriter(sys.stdout, fieldnames=["family", "segments", *CHECKS])
    writer.writeheader()
    for name in args.families:
        writer.writerow(sweep(name, args.trials, args.n_y, args.seed))
        sys.stdout.flush()


if __name__ == "__main__":
    main()
