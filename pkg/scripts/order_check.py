"""Integrator convergence study on the closed-form circle.

Compares endpoint errors when halving ``rtol`` in adaptive mode against
halving the step of the same tableau run at a fixed step.
"""
from __future__ import annotations

import argparse
import math

import numpy as np

from nfforge.numverify import NumericField, integrate_fixed, integrate_flow, write_csv
from nfforge.series import VectorFieldJet


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--csv", default=None, help="optional CSV output path")
    args = ap.parse_args()

    f = NumericField.from_jet(VectorFieldJet.from_matrix([[0, -1], [1, 0]], 2))
    x0, T = np.array([1.0, 0.0]), 2 * math.pi
    rows = []
    for rtol in (1e-6, 5e-7, 1e-8, 5e-9):
        traj = integrate_flow(f, x0, T, rtol=rtol, atol=rtol * 1e-2)
        err = float(np.linalg.norm(traj.end - x0))
        rows.append(("adaptive", rtol, err, traj.accepted))
        print(f"adaptive rtol={rtol:.0e}  error={err:.3e}  steps={traj.accepted}")
    for steps in (8, 16, 32, 64):
        err = float(np.linalg.norm(integrate_fixed(f, x0, T, steps) - x0))
        rows.append(("fixed", T / steps, err, steps))
        print(f"fixed    h={T / steps:.4f}  error={err:.3e}")
    if args.csv:
        write_csv(args.csv, ("mode", "control", "error", "steps"), rows)


if __name__ == "__main__":
    main()
