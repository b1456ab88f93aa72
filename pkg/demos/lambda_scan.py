"""Bracket the optimal constant across lambda and write a small report."""

import sys
from pathlib import Path

import numpy as np

from ltlab.pipeline import scan_lambda
from ltlab.report import build_report, write_csv
from ltlab.solvers import QuotientProblem, solve_gn
from ltlab.states import bump_field


def main(out="runs/demo_scan"):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    L, M = 64.0, 1024
    # a compact bump plus the numerical ground state as trial profiles
    gn = solve_gn(QuotientProblem(1, 1.0, L, M), presets=("gaussian",))
    profiles = [bump_field(1, L, M, width=1.0), gn.minimizer]
    scan = scan_lambda(np.logspace(0, 6, 7), profiles=profiles, box_side=L, points_per_axis=M,
                       samples=5000)
    for r in scan.rows():
        print(f"lambda={r['lambda']:9.3g} upper={r['trial_upper']:.5f} "
              f"lower={r['assembled_lower']:.5f} prediction={r['gn_gap_prediction']:.5f}")
    write_csv(out / "scan.csv", scan.rows())
    for p in build_report(out):
        print("wrote", p)


if __name__ == "__main__":
    main(*sys.argv[1:])
