"""Command-line front end: parse a system file, run the pipeline, print a JSON report.

System files are JSON with every exact number written as a rational string::

    {"dimension": 2, "order": 6,
     "linear_part": [["1", "0"], ["0", "-1"]],
     "higher_order": [[{"exponents": [2, 1], "coeff_re": "1", "coeff_im": "0"}], []],
     "first_integrals": [[{"exponents": [1, 1], "coeff_re": "1"}]],
     "numeric": {"period_radii": [0.1, 0.05, 0.025], "rtol": 1e-10}}

Exit codes: 0 success, 1 hypothesis violation or obstruction, 2 parse error,
3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys as _sys
import warnings
from dataclasses import dataclass, field

import numpy as np
from gmpy2 import mpq

from .config import NumericConfig
from .exact import QI, parse_rational
from .integrability import (
    IntegrabilityWarning,
    IntegrableSystem,
    check_nondegeneracy,
    singular_locus_2d,
)
from .invariants import hilbert_basis, invariant_generators
from .normalform import (
    HypothesisViolation,
    ObstructionNonzero,
    analyze_linear_part,
    geometric_normalize,
    verify_normal_form,
)
from .numverify import (
    LeftDomain,
    NoReturn,
    NumericField,
    RootNotBracketed,
    StepSizeUnderflow,
    conjugacy_residual_scan,
    conservation_residual,
    integrate_flow,
    period_flatness_scan,
    series_evaluator,
    singular_locus_scan_2d,
    write_csv,
)
from .series import TruncatedSeries, VectorFieldJet, compose_series
from .spectrum import Case, SpectrumError, classify_matrix

__all__ = [
    "ParseError",
    "Report",
    "EXIT_OK",
    "EXIT_HYPOTHESIS",
    "EXIT_PARSE",
    "EXIT_NUMERIC",
    "parse_system",
    "parse_system_data",
    "serialize_system",
    "run_pipeline",
    "main",
]

EXIT_OK, EXIT_HYPOTHESIS, EXIT_PARSE, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("classify", "invariants", "normalize", "verify", "report")
NUMERIC_ERRORS = (NoReturn, LeftDomain, StepSizeUnderflow, RootNotBracketed)


class ParseError(ValueError):
    pass


# ------------------------------------------------------------ parsing


def _rational(text, where):
    if not isinstance(text, (str, int)) or isinstance(text, bool):
        raise ParseError(f"{where}: exact numbers must be rational strings, got {text!r}")
    try:
        return parse_rational(str(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"{where}: bad rational literal {text!r}: {exc}") from None


def _coeff(term, where):
    if "coeff_re" not in term and "coeff_im" not in term:
        raise ParseError(f"{where}: term needs coeff_re and/or coeff_im")
    re = _rational(term.get("coeff_re", "0"), where + ".coeff_re")
    im = _rational(term.get("coeff_im", "0"), where + ".coeff_im")
    return QI(re, im) if im else re


def _terms(raw, n, order, where, min_degree=0):
    if not isinstance(raw, list):
        raise ParseError(f"{where}: expected a list of terms")
    out = {}
    for k, term in enumerate(raw):
        here = f"{where}[{k}]"
        if not isinstance(term, dict) or "exponents" not in term:
            raise ParseError(f"{here}: term needs an 'exponents' list")
        exp = term["exponents"]
        if (not isinstance(exp, list) or len(exp) != n
                or not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0 for e in exp)):
            raise ParseError(f"{here}: exponents must be {n} nonnegative integers")
        if sum(exp) < min_degree:
            raise ParseError(f"{here}: degree {sum(exp)} below {min_degree}")
        if sum(exp) > order:
            raise ParseError(f"{here}: degree {sum(exp)} exceeds the order {order}")
        key = tuple(exp)
        out[key] = out.get(key, 0) + _coeff(term, here)
    return TruncatedSeries(n, order, out)


def parse_system_data(data) -> tuple:
    """``(IntegrableSystem, numeric options)`` from decoded JSON; warns if ``X(F) != 0``."""
    if not isinstance(data, dict):
        raise ParseError("system file must hold a JSON object")
    for key in ("dimension", "order", "linear_part"):
        if key not in data:
            raise ParseError(f"missing field {key!r}")
    n, order = data["dimension"], data["order"]
    if not isinstance(n, int) or n < 1 or not isinstance(order, int) or order < 1:
        raise ParseError("dimension and order must be positive integers")
    A = data["linear_part"]
    if not isinstance(A, list) or len(A) != n or any(not isinstance(r, list) or len(r) != n for r in A):
        raise ParseError(f"dimension mismatch: linear_part must be {n}x{n}")
    matrix = [[_rational(v, f"linear_part[{i}][{j}]") for j, v in enumerate(row)] for i, row in enumerate(A)]
    higher_raw = data.get("higher_order", [[] for _ in range(n)])
    if not isinstance(higher_raw, list) or len(higher_raw) != n:
        raise ParseError(f"dimension mismatch: higher_order needs {n} component lists")
    higher = [_terms(c, n, order, f"higher_order[{i}]", min_degree=2) for i, c in enumerate(higher_raw)]
    Fs = [_terms(f, n, order, f"first_integrals[{i}]") for i, f in enumerate(data.get("first_integrals", []))]
    numeric = data.get("numeric", {})
    if not isinstance(numeric, dict):
        raise ParseError("numeric section must be an object")
    X = VectorFieldJet.from_matrix(matrix, order, higher)
    with warnings.catch_warnings():
        warnings.simplefilter("always", IntegrabilityWarning)
        system = IntegrableSystem(X, tuple(Fs), order)
    return system, dict(numeric)


def parse_system(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    return parse_system_data(data)


def _str(c):
    return str(mpq(c))


def _term_list(s: TruncatedSeries):
    out = []
    for e, c in s.items():
        t = {"exponents": list(e)}
        if isinstance(c, QI):
            t["coeff_re"], t["coeff_im"] = _str(c.re), _str(c.im)
        else:
            t["coeff_re"], t["coeff_im"] = _str(c), "0"
        out.append(t)
    return out


def serialize_system(system: IntegrableSystem, numeric=None) -> dict:
    X = system.X
    n = X.nvars
    out = {
        "dimension": n,
        "order": X.order,
        "linear_part": [[_str(v) if not isinstance(v, QI) else str(v) for v in row] for row in X.linear_part],
        "higher_order": [_term_list(c.drop_below(2)) for c in X],
        "first_integrals": [_term_list(f) for f in system.first_integrals],
    }
    if numeric:
        out["numeric"] = numeric
    return out


# ------------------------------------------------------------ pipeline


@dataclass
class Report:
    command: str
    data: dict = field(default_factory=dict)
    exit_code: int = EXIT_OK
    csv: dict = field(default_factory=dict)  # name -> (header, rows)

    def to_json(self) -> str:
        body = dict(self.data)
        body["command"] = self.command
        body["exit_code"] = self.exit_code
        return json.dumps(_jsonable(body), sort_keys=True, indent=2, ensure_ascii=False)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else str(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return _jsonable(obj.item())
    if isinstance(obj, Case):
        return obj.value
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return str(obj)


def _classify(system):
    out = {"nondegeneracy": check_nondegeneracy(system).to_dict()}
    try:
        out["classification"] = classify_matrix(system.X.linear_part).to_dict()
    except SpectrumError as exc:
        out["classification"] = None
        out["diagnostic"] = f"{type(exc).__name__}: {exc}"
    return out


def _invariants(system):
    cls, _ = analyze_linear_part(system.X)
    hb = hilbert_basis(cls.m)
    ig = invariant_generators(cls, hb, order=max([sum(g) for g in hb.generators] + [1]))
    return {
        "classification": cls.to_dict(),
        "hilbert_basis": [list(g) for g in hb.generators],
        "real_forms": [{"label": [lab[0], list(lab[1])], "terms": _term_list(q)}
                       for lab, q in zip(ig.labels, ig.real_forms)],
    }


def _normalize(system, order):
    nf = geometric_normalize(system, order, express=True)
    check = verify_normal_form(system, nf)
    return nf, {
        "classification": nf.cls.to_dict(),
        "order": nf.residual_order,
        "residual_order": nf.residual_order,
        "phi": [_term_list(c) for c in nf.phi],
        "F": _term_list(nf.F),
        "F_hat": _term_list(nf.F_hat) if nf.F_hat is not None else None,
        "lambda": str(nf.lam),
        "exact_check": {"residual_zero": check.residual.is_zero(), "F_at_origin": str(check.F_at_origin),
                        "annihilated": check.annihilation.is_zero(), "ok": check.ok},
    }


def _obstruction_probe(system, order):
    """Run the bare-jet normalization non-strictly to report where it breaks."""
    try:
        nf = geometric_normalize(system.X, order, strict=False)
    except HypothesisViolation:
        return None
    if nf.obstruction is None:
        return None
    return {"degree": nf.obstruction.degree,
            "leftover": [_term_list(c) for c in nf.obstruction.leftover]}


def _start_point(n, radius, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    return radius * u / np.linalg.norm(u)


def _verify(system, nf, cfg: NumericConfig, radii, seed):
    """Numeric scans; returns (summary dict, csv tables, all-passed flag)."""
    cls = nf.cls
    lam = float(nf.lam)
    out, tables, passed = {}, {}, True
    char_time = 2 * math.pi / lam if cls.elliptic else 1.0 / lam
    x0 = (np.array([float(v) for v in cfg.x0]) if cfg.x0 is not None
          else _start_point(system.n, cfg.x0_radius, seed))
    field_ = NumericField.from_jet(system.X)
    if system.first_integrals:
        T = cfg.periods * char_time
        traj = integrate_flow(field_, x0, T, cfg.rtol, cfg.atol)
        drift = conservation_residual(traj, system.first_integrals)
        ok = drift < cfg.conservation_tol
        out["conservation"] = {"x0": x0.tolist(), "T": T, "drift": drift, "passed": ok,
                               "accepted_steps": traj.accepted, "rejected_steps": traj.rejected}
        passed &= ok
    curve = conjugacy_residual_scan(system, nf, radii or cfg.conjugacy_radii, samples=cfg.samples, seed=seed)
    out["conjugacy"] = curve.to_dict()
    tables["conjugacy"] = (("radius", "residual"), curve.rows())
    passed &= curve.passed
    if cls.case is Case.STRONG_ELLIPTIC:
        # orbits of Y = X / F are periodic with the linear period
        F_orig = compose_series(nf.F, list(nf.phi))
        Y = NumericField.from_jet(system.X, divide_by=F_orig)
        curve = period_flatness_scan(Y, lam, radii or cfg.period_radii, p=cfg.p)
        out["period"] = curve.to_dict()
        tables["period"] = (("radius", "deviation"), curve.rows())
        passed &= curve.passed
    if cls.case is Case.WEAK_HYPERBOLIC and system.n == 2:
        loc = singular_locus_2d(system.X)
        w = cfg.locus_halfwidth
        scan = singular_locus_scan_2d(field_, np.linspace(-w, w, cfg.locus_points))
        g = series_evaluator(loc.curve)
        gap = max(abs(x - g(np.array([y]))) for x, y in zip(scan.x, scan.y))
        ok = gap < cfg.locus_gap_tol and scan.max_field_norm < cfg.locus_norm_tol
        out["locus"] = {"jet": loc.to_dict(), "scan": scan.to_dict(), "max_gap": gap, "passed": ok}
        tables["locus"] = (("y", "x", "field_norm"), scan.rows())
        passed &= ok
    return out, tables, passed


def run_pipeline(cmd: str, system: IntegrableSystem, *, numeric=None, order=None, radii=None,
                 seed: int = 0) -> Report:
    if cmd not in COMMANDS:
        raise ValueError(f"unknown command {cmd!r}")
    cfg = numeric if isinstance(numeric, NumericConfig) else NumericConfig.from_dict(numeric)
    rep = Report(cmd)
    rep.data["integrable"] = system.integrable
    if not system.integrable:
        rep.data["integrability_violation_degree"] = system.violation_degree
    if cmd in ("classify", "report"):
        rep.data.update(_classify(system))
    try:
        if cmd in ("invariants", "report"):
            rep.data["invariants"] = _invariants(system)
        if cmd in ("normalize", "verify", "report"):
            N = order if order is not None else system.order
            try:
                nf, summary = _normalize(system, N)
            except ObstructionNonzero as exc:
                ob = exc.obstruction
                rep.data["obstruction"] = {"degree": ob.degree, "leftover": [_term_list(c) for c in ob.leftover]}
                rep.data["diagnostic"] = f"obstruction at degree {ob.degree}"
                rep.exit_code = EXIT_HYPOTHESIS
                return rep
            except HypothesisViolation as exc:
                rep.data["diagnostic"] = str(exc)
                probe = _obstruction_probe(system, N)
                if probe is not None:
                    rep.data["obstruction"] = probe
                rep.exit_code = EXIT_HYPOTHESIS
                return rep
            rep.data["normal_form"] = summary
            if not summary["exact_check"]["ok"]:
                rep.exit_code = EXIT_HYPOTHESIS
                return rep
            if cmd in ("verify", "report"):
                try:
                    scans, tables, ok = _verify(system, nf, cfg, radii, seed)
                except NUMERIC_ERRORS as exc:
                    rep.data["diagnostic"] = f"{type(exc).__name__}: {exc}"
                    rep.exit_code = EXIT_NUMERIC
                    return rep
                rep.data["scans"] = scans
                rep.data["verdict"] = "PASS" if ok else "FAIL"
                rep.csv.update(tables)
                if not ok:
                    rep.exit_code = EXIT_NUMERIC
    except HypothesisViolation as exc:
        rep.data["diagnostic"] = str(exc)
        rep.exit_code = EXIT_HYPOTHESIS
    return rep


# ------------------------------------------------------------ entry point


def _radii(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radii list {text!r}") from None
    if len(vals) < 2 or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("need at least two positive radii")
    return vals


def _parser():
    p = argparse.ArgumentParser(prog="nfforge", description="Geometric linearization of integrable jets.")
    sub = p.add_subparsers(dest="cmd", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("file")
        s.add_argument("--seed", type=int, default=0)
        if name in ("normalize", "verify", "report"):
            s.add_argument("--order", type=int, default=None)
        if name in ("verify", "report"):
            s.add_argument("--radii", type=_radii, default=None)
        if name == "report":
            s.add_argument("--out", default=None)
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrabilityWarning)
        try:
            system, numeric = parse_system(args.file)
        except (ParseError, ValueError) as exc:
            print(json.dumps({"command": args.cmd, "error": f"parse error: {exc}", "exit_code": EXIT_PARSE},
                             sort_keys=True), file=_sys.stdout)
            return EXIT_PARSE
    for w in caught:
        print(f"warning: {w.message}", file=_sys.stderr)
    rep = run_pipeline(args.cmd, system, numeric=numeric, order=getattr(args, "order", None),
                       radii=getattr(args, "radii", None), seed=args.seed)
    if args.cmd == "report" and args.out:
        os.makedirs(args.out, exist_ok=True)
        for name, (header, rows) in sorted(rep.csv.items()):
            write_csv(os.path.join(args.out, f"scan_{name}.csv"), header, rows)
        with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(rep.to_json() + "\n")
    _sys.stdout.write(rep.to_json() + "\n")
    return rep.exit_code


def console_main():
    raise SystemExit(main())


if __name__ == "__main__":
    console_main()
