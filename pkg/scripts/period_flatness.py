"""Period deviation ladders for the planar elliptic examples.

Three fields: (1 + r^2) times the rotation, the same field divided by its
factor, and the rotation with an exp(-1/r^2) perturbation.  Each curve is
written as scan_<name>.csv under --out.
"""
from __future__ import annotations

import argparse
import math
import os

import numpy as np

from nfforge.numverify import NumericField, period_flatness_scan, write_csv
from nfforge.series import TruncatedSeries, VectorFieldJet


def flat_bump(x):
    r2 = float(x @ x)
    if r2 == 0.0:
        return np.zeros(2)
    return 1e3 * math.exp(-1.0 / r2) * np.array([-x[1], x[0]])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/flatness")
    ap.add_argument("--p", type=float, default=4.0)
    args = ap.parse_args()

    rot = VectorFieldJet.from_matrix([[0, -1], [1, 0]], 4)
    F = TruncatedSeries(2, 4, {(0, 0): 1, (2, 0): 1, (0, 2): 1})
    ladder = (0.1, 0.05, 0.025, 0.0125)
    cases = [
        ("factor", NumericField.from_jet(rot.times(F)), ladder, {}),
        ("divided", NumericField.from_jet(rot.times(F), divide_by=F), ladder, {}),
        ("flat", NumericField.from_jet(rot, perturbation=flat_bump), (0.3, 0.25, 0.2, 0.15), {"noise_floor": 0.0}),
    ]
    os.makedirs(args.out, exist_ok=True)
    for name, f, radii, kw in cases:
        curve = period_flatness_scan(f, 1.0, radii, p=args.p, name=name, **kw)
        write_csv(os.path.join(args.out, f"scan_{name}.csv"), ("radius", "deviation"), curve.rows())
        verdict = "PASS" if curve.passed else "FAIL"
        print(f"{name:8s} slope={curve.slope:7.2f} max dev={max(curve.values):.2e} "
              f"saturated={curve.saturated} {verdict}")


if __name__ == "__main__":
    main()
