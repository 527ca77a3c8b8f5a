"""Time the exact round trip on seeded random instances (pushforward of F0 X1)."""
from __future__ import annotations

import argparse
import time

from nfforge.instances import random_instance
from nfforge.normalform import geometric_normalize, verify_normal_form
from nfforge.numverify import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--order", type=int, default=6)
    ap.add_argument("--count", type=int, default=100)
    ap.add_argument("--dims", default="2,3,4")
    ap.add_argument("--method", choices=("pushforward", "defect"), default="pushforward")
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()

    rows = []
    for n in (int(v) for v in args.dims.split(",")):
        t0 = time.perf_counter()
        failures = 0
        for seed in range(args.count):
            inst = random_instance(n, args.order, seed)
            nf = geometric_normalize(inst.X, args.order)
            failures += not verify_normal_form(inst.X, nf, method=args.method).ok
        dt = time.perf_counter() - t0
        rows.append((n, args.count, failures, dt))
        print(f"n={n}: {args.count} instances, {failures} failures, {dt:.2f} s")
    if args.csv:
        write_csv(args.csv, ("n", "instances", "failures", "seconds"), rows)


if __name__ == "__main__":
    main()
