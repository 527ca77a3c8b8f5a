"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one ``ACCEPTANCE <k> PASS|FAIL`` line (also under output
capture) before asserting.
"""

import itertools
import json
import math
import os
import subprocess
import sys
import time
from math import gcd

import numpy as np
import pytest

from nfforge.cli import EXIT_HYPOTHESIS, main, parse_system
from nfforge.instances import random_instance
from nfforge.integrability import singular_locus_2d
from nfforge.invariants import hilbert_basis, invariant_generators
from nfforge.normalform import geometric_normalize, verify_normal_form
from nfforge.numverify import (
    NumericField,
    conjugacy_residual_scan,
    conservation_residual,
    detect_period,
    integrate_flow,
    period_flatness_scan,
    series_evaluator,
    singular_locus_scan_2d,
)
from nfforge.series import TruncatedSeries, VectorFieldJet, compose_series, lie_derivative
from nfforge.spectrum import Case, canonical_matrix, classify_matrix
from oracles import FIXTURES, ROOT

VALID = ["hyperbolic2d", "elliptic2d", "hyperbolic3d", "weak3d", "weak2d"]


@pytest.fixture
def verdict(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def load(name):
    system, numeric = parse_system(str(FIXTURES / f"{name}.json"))
    return system, numeric


# ---------------------------------------------------------------- 1


SH, WH, SE, WE = Case.STRONG_HYPERBOLIC, Case.WEAK_HYPERBOLIC, Case.STRONG_ELLIPTIC, Case.WEAK_ELLIPTIC

# (matrix, case, k, m) worked out by hand from the eigenvalues
LINEAR_PARTS = [
    ([[1, 0], [0, -1]], SH, 0, (1, -1)),
    ([[2, 0], [0, -3]], SH, 0, (2, -3)),
    ([[1, 2], [2, 1]], SH, 0, (3, -1)),
    ([[0, 1], [1, 0]], SH, 0, (1, -1)),
    ([[1, 0, 0], [0, 1, 0], [0, 0, -2]], SH, 0, (1, 1, -2)),
    ([[-1, 0, 0], [0, -1, 0], [0, 0, 2]], SH, 0, (2, -1, -1)),
    ([[2, 0, 0, 0], [0, 1, 0, 0], [0, 0, -1, 0], [0, 0, 0, -2]], SH, 0, (2, 1, -1, -2)),
    ([[0, 0, 0], [0, 5, 0], [0, 0, -5]], WH, 1, (0, 1, -1)),
    ([[0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 3, 0], [0, 0, 0, -3]], WH, 2, (0, 0, 1, -1)),
    ([[0, -2], [2, 0]], SE, 0, (1, -1)),
    ([[0, 1], [-4, 0]], SE, 0, (1, -1)),
    ([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -2], [0, 0, 2, 0]], SE, 0, (1, -1, 2, -2)),
    ([[0, -2, 0, 0], [2, 0, 0, 0], [0, 0, 0, -3], [0, 0, 3, 0]], SE, 0, (2, -2, 3, -3)),
    ([[0, 0, 0], [0, 0, -1], [0, 1, 0]], WE, 1, (0, 1, -1)),
    ([[0, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]], WE, 2, (0, 0, 1, -1)),
]


def test_criterion_01_classification(verdict):
    t = time.perf_counter()
    got = [classify_matrix(A) for A, *_ in LINEAR_PARTS]
    elapsed = time.perf_counter() - t
    wrong = [i for i, (c, (_, case, k, m)) in enumerate(zip(got, LINEAR_PARTS))
             if (c.case, c.k, c.m) != (case, k, m)]
    primitive = all(math.gcd(*[abs(v) for v in c.m if v]) == 1 for c in got)
    cases = {c.case for c in got}
    ok = not wrong and primitive and cases == set(Case) and len(got) >= 12 and elapsed < 1.0
    verdict(1, ok, f"{len(got)} linear parts, mismatches={wrong}, gcd ok={primitive}, "
                   f"cases={len(cases)}/4, {elapsed:.3f} s")


# ---------------------------------------------------------------- 2


def _monomials(n, bound):
    out = [a for a in itertools.product(range(bound + 1), repeat=n) if 0 < sum(a) <= bound]
    return sorted(out, key=sum)


def _generated(basis, candidates):
    """Members of ``candidates`` (sorted by degree) reachable as sums of basis vectors."""
    reach = set()
    for a in candidates:
        for g in basis:
            rest = tuple(x - y for x, y in zip(a, g))
            if min(rest) >= 0 and (not any(rest) or rest in reach):
                reach.add(a)
                break
    return reach


def test_criterion_02_hilbert_basis(verdict):
    bound = 8
    tables = {n: _monomials(n, bound) for n in range(1, 5)}
    failures, count, compute = [], 0, 0.0
    start = time.perf_counter()
    for n in range(1, 5):
        for m in itertools.product(range(-3, 4), repeat=n):
            if not any(m):
                continue
            count += 1
            t = time.perf_counter()
            gens = hilbert_basis(m).generators
            compute += time.perf_counter() - t
            sols = [a for a in tables[n] if sum(x * y for x, y in zip(a, m)) == 0]
            if set(_generated(gens, sols)) != set(sols) or any(sum(g) > bound for g in gens):
                failures.append(m)
                continue
            sol_set = set(sols)
            for g in gens:
                # minimal: no generator splits into two nonzero solutions
                if any(b != g and tuple(x - y for x, y in zip(g, b)) in sol_set
                       for b in sols if all(x <= y for x, y in zip(b, g))):
                    failures.append(m)
                    break
    total = time.perf_counter() - start
    ok = not failures and total < 30.0
    verdict(2, ok, f"{count} vectors m, failures={failures[:5]}, basis time {compute:.2f} s, "
                   f"total with oracle {total:.2f} s")


# ---------------------------------------------------------------- 3


def test_criterion_03_invariant_annihilation(verdict):
    classes = [classify_matrix(A) for A, *_ in LINEAR_PARTS]
    for name in VALID:
        system, _ = load(name)
        classes.append(classify_matrix(system.X.linear_part))
    checked, bad = 0, []
    for cls in classes:
        ig = invariant_generators(cls, hilbert_basis(cls.m))
        X1 = VectorFieldJet.from_matrix(canonical_matrix(cls.m, cls.case.elliptic), ig.order)
        for q in ig.real_forms:
            checked += 1
            if not lie_derivative(X1, q).is_zero():
                bad.append((cls.m, q))
    verdict(3, not bad and checked > 0, f"{checked} generators over {len(classes)} linear parts, nonzero={len(bad)}")


# ---------------------------------------------------------------- 4


def test_criterion_04_round_trip(verdict):
    N = 6
    bad, count = [], 0
    t = time.perf_counter()
    for n in (2, 3, 4):
        for seed in range(100):
            inst = random_instance(n, N, seed)
            nf = geometric_normalize(inst.X, N)
            check = verify_normal_form(inst.X, nf)
            count += 1
            if not (check.residual.is_zero() and check.F_at_origin == 1
                    and lie_derivative(nf.linear_part, nf.F).is_zero()):
                bad.append((n, seed))
    elapsed = time.perf_counter() - t
    ok = not bad and elapsed < 60.0
    verdict(4, ok, f"{count} instances at N={N}, failures={bad[:5]}, {elapsed:.1f} s")


# ---------------------------------------------------------------- 5


def test_criterion_05_obstruction(verdict, capsys):
    code = main(["normalize", str(FIXTURES / "obstruction.json")])
    out = json.loads(capsys.readouterr().out)
    code_r = main(["report", str(FIXTURES / "obstruction.json")])
    rep = json.loads(capsys.readouterr().out)
    degree = out.get("obstruction", {}).get("degree")
    ok = (code == code_r == EXIT_HYPOTHESIS and degree is not None and "normal_form" not in out
          and "verdict" not in rep)
    verdict(5, ok, f"exit codes {code}/{code_r}, obstruction degree {degree}")


# ---------------------------------------------------------------- 6


def test_criterion_06_conservation(verdict):
    rtol = 1e-10
    drifts = {}
    for name in VALID:
        system, numeric = load(name)
        cls = classify_matrix(system.X.linear_part)
        T = 5 * (2 * math.pi / cls.lam if cls.case.elliptic else 1.0 / cls.lam)
        if "x0" in numeric:
            x0 = np.array([float(v) for v in numeric["x0"]])
        else:
            u = np.random.default_rng(0).standard_normal(system.n)
            x0 = 0.01 * u / np.linalg.norm(u)
        traj = integrate_flow(NumericField.from_jet(system.X), x0, T, rtol=rtol, atol=1e-12)
        drifts[name] = conservation_residual(traj, system.first_integrals)
    worst = max(drifts.values())
    verdict(6, worst < 1e-6, "max drift " + ", ".join(f"{k}={v:.1e}" for k, v in drifts.items()))


# ---------------------------------------------------------------- 7


def test_criterion_07_elliptic_period(verdict):
    system, _ = load("elliptic2d")
    f = NumericField.from_jet(system.X)
    errs = []
    for r in (0.1, 0.05, 0.025):
        est = detect_period(f, [r, 0.0], 2 * math.pi)
        errs.append(abs(est.T - 2 * math.pi / (1 + r * r)))
    F = TruncatedSeries(2, system.order, {(0, 0): 1, (2, 0): 1, (0, 2): 1})
    nf = geometric_normalize(system, system.order)
    F_orig = compose_series(nf.F, list(nf.phi))
    assert F_orig == F  # the fixture is already in normal form
    Y = NumericField.from_jet(system.X, divide_by=F_orig)
    curve = period_flatness_scan(Y, 1.0, (0.1, 0.05, 0.025, 0.0125), p=4.0)
    ok = max(errs) < 1e-7 and curve.passed and max(curve.values) < 1e-9 * 2 * math.pi
    verdict(7, ok, f"period errors {[f'{e:.1e}' for e in errs]}, Y scan max deviation "
                   f"{max(curve.values):.1e} (saturated={curve.saturated}, passed={curve.passed})")


# ---------------------------------------------------------------- 8


def test_criterion_08_conjugacy_decay(verdict):
    radii = (1e-1, 3e-2, 1e-2, 3e-3)
    slopes, bad = [], []
    jets = [(f"random n={n} seed={s}", random_instance(n, 6, s).X) for n in (2, 3, 4) for s in range(3)]
    jets += [(name, load(name)[0]) for name in VALID]
    for label, X in jets:
        for N in (3, 4, 5, 6):
            nf = geometric_normalize(X, N)
            if not verify_normal_form(X, nf).ok:
                continue
            curve = conjugacy_residual_scan(X, nf, radii)
            slopes.append(curve.slope)
            if not (curve.saturated or curve.slope >= N + 0.5):
                bad.append((label, N, round(curve.slope, 2)))
    finite = [s for s in slopes if math.isfinite(s)]
    verdict(8, not bad and slopes, f"{len(slopes)} accepted normal forms, min finite slope "
                                   f"{min(finite):.2f}, failures={bad[:5]}")


# ---------------------------------------------------------------- 9


def test_criterion_09_planar_locus(verdict):
    system, _ = load("weak2d")
    X = system.X
    ygrid = np.linspace(-0.1, 0.1, 41)
    loc = singular_locus_2d(X)
    scan = singular_locus_scan_2d(NumericField.from_jet(X), ygrid)
    g = series_evaluator(loc.curve)
    gap = max(abs(x - g(np.array([y]))) for x, y in zip(scan.x, scan.y))

    # negative control: a second component y^5 (1 + x) that does not vanish on the curve
    bump = TruncatedSeries(2, X.order, {(0, 5): 1, (1, 5): 1})
    bad = VectorFieldJet([X[0], X[1] + bump])
    control = singular_locus_scan_2d(NumericField.from_jet(bad), ygrid)
    violation = control.max_field_norm >= 1e-8 or not singular_locus_2d(bad).s_equals_s1
    ok = gap < 1e-6 and scan.max_field_norm < 1e-8 and loc.s_equals_s1 and violation
    verdict(9, ok, f"jet/numeric gap {gap:.1e}, field norm on locus {scan.max_field_norm:.1e}, "
                   f"control norm {control.max_field_norm:.1e}")


# ---------------------------------------------------------------- 10


def test_criterion_10_determinism(verdict):
    cmd = [sys.executable, "-m", "nfforge.cli", "report", str(FIXTURES / "elliptic2d.json"), "--seed", "0"]
    outs = []
    for hashseed in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        outs.append(subprocess.run(cmd, capture_output=True, env=env, cwd=ROOT, check=False).stdout)
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    verdict(10, ok, f"two report runs, {len(outs[0])} bytes each, identical={outs[0] == outs[1]}")
