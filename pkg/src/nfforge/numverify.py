"""Floating-point checks of the dynamics: conservation, periods, residual decay, planar loci.

Integration is scipy's DOP853 driven step by step, so accepted and rejected
steps can be counted and each step's dense interpolant kept.  "Flat" is read
at desk scale as a log-log slope above a configurable exponent over a
geometric radius ladder.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from gmpy2 import mpq
from scipy.integrate import DOP853, OdeSolution
from scipy.optimize import brentq

from .exact import QI, ZERO, is_real, real_part
from .series import PolyMap, TruncatedSeries, VectorFieldJet

__all__ = [
    "NumericField",
    "Trajectory",
    "PeriodEstimate",
    "ResidualCurve",
    "LocusScan",
    "StepSizeUnderflow",
    "LeftDomain",
    "NoReturn",
    "RootNotBracketed",
    "integrate_flow",
    "integrate_fixed",
    "conservation_residual",
    "detect_period",
    "period_flatness_scan",
    "conjugacy_residual_scan",
    "singular_locus_scan_2d",
    "fit_slope",
    "series_evaluator",
    "thread_count",
    "write_csv",
    "write_json",
]

GRAZING = 1e-12
NOISE_FLOOR = 1e-9


class StepSizeUnderflow(RuntimeError):
    pass


class LeftDomain(RuntimeError):
    pass


class NoReturn(RuntimeError):
    pass


class RootNotBracketed(RuntimeError):
    pass


def thread_count() -> int:
    """Worker cap from ``NFFORGE_THREADS`` (default 1)."""
    raw = os.environ.get("NFFORGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _ordered_map(fn, items):
    items = list(items)
    workers = min(thread_count(), len(items)) or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))  # map keeps input order


# ------------------------------------------------------------ evaluation


class _Poly:
    """Float evaluator for one real series; terms kept in canonical order."""

    __slots__ = ("exps", "coeffs", "top")

    def __init__(self, s: TruncatedSeries):
        items = s.items()
        if not all(is_real(c) for _, c in items):
            raise ValueError("numeric evaluation needs real coefficients")
        self.exps = np.array([e for e, _ in items], dtype=np.int64).reshape(len(items), s.nvars)
        self.coeffs = np.array([float(real_part(c)) for _, c in items], dtype=float)
        self.top = int(self.exps.max()) if len(items) else 0

    def __call__(self, x):
        if not len(self.coeffs):
            return 0.0
        x = np.asarray(x, dtype=float)
        table = x[:, None] ** np.arange(self.top + 1)
        vals = table[np.arange(x.size)[None, :], self.exps].prod(axis=1)
        return float(np.sum(self.coeffs * vals))  # numpy sums pairwise


def series_evaluator(s: TruncatedSeries):
    """Float callable for a real series."""
    return _Poly(s)


@dataclass(frozen=True)
class NumericField:
    n: int
    fn: object
    label: str = ""

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    @classmethod
    def from_jet(cls, X: VectorFieldJet, *, divide_by: TruncatedSeries | None = None,
                 perturbation=None, label: str = ""):
        """Evaluate a jet, optionally divided by ``divide_by`` and plus a callable term."""
        comps = [_Poly(c) for c in X]
        div = _Poly(divide_by) if divide_by is not None else None
        n = X.nvars

        def fn(x):
            out = np.array([c(x) for c in comps])
            if div is not None:
                out = out / div(x)
            if perturbation is not None:
                out = out + np.asarray(perturbation(x), dtype=float)
            return out

        return cls(n, fn, label)

    @classmethod
    def from_callable(cls, fn, n: int, label: str = ""):
        return cls(n, fn, label)


# ------------------------------------------------------------ integration


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # shape (samples, n)
    rtol: float
    atol: float
    accepted: int
    rejected: int
    dense: object = field(repr=False, compare=False, default=None)

    def __call__(self, t):
        return self.dense(t)

    @property
    def end(self):
        return self.y[-1]


def _solve(f: NumericField, x0, T, rtol, atol, ball, max_step, stop=None):
    """Step DOP853 to ``T``; ``stop(t0, t1, interp)`` may end the run early by returning a value."""
    calls = [0]

    def rhs(_t, y):
        calls[0] += 1
        return f(y)

    x0 = np.asarray(x0, dtype=float)
    if ball is not None and np.linalg.norm(x0) > ball:
        raise LeftDomain("initial point outside the working ball")
    solver = DOP853(rhs, 0.0, x0, T, rtol=rtol, atol=atol, max_step=max_step)
    ts, ys, interps = [0.0], [x0.copy()], []
    attempts = 0
    result = None
    while solver.status == "running":
        before = calls[0]
        msg = solver.step()
        # every attempt (accepted or not) costs n_stages evaluations
        attempts += (calls[0] - before) // solver.n_stages
        if solver.status == "failed":
            raise StepSizeUnderflow(msg or "step size underflow")
        y = solver.y.copy()
        if ball is not None and np.linalg.norm(y) > ball:
            raise LeftDomain(f"trajectory left the ball of radius {ball} at t={solver.t:.6g}")
        interp = solver.dense_output()
        ts.append(solver.t)
        ys.append(y)
        interps.append(interp)
        if stop is not None:
            result = stop(ts[-2], ts[-1], interp)
            if result is not None:
                break
    accepted = len(ts) - 1
    dense = OdeSolution(ts, interps) if interps else None
    traj = Trajectory(np.array(ts), np.array(ys), rtol, atol, accepted, attempts - accepted, dense)
    return traj, result


def integrate_flow(f: NumericField, x0, T: float, rtol: float = 1e-10, atol: float = 1e-12, *,
                   ball: float | None = 1e3, max_step: float = np.inf) -> Trajectory:
    """Adaptive order-8 embedded Runge-Kutta integration with dense output."""
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    if T <= 0:
        raise ValueError("T must be positive")
    traj, _ = _solve(f, x0, T, rtol, atol, ball, max_step)
    return traj


def integrate_fixed(f: NumericField, x0, T: float, steps: int):
    """Fixed-step run of the same DOP853 tableau; used for the order check."""
    A, B = DOP853.A, DOP853.B  # autonomous fields: stage times are not needed
    h = T / steps
    y = np.asarray(x0, dtype=float).copy()
    K = np.empty((len(B), y.size))
    for _ in range(steps):
        for s in range(len(B)):
            K[s] = f(y + h * (A[s, :s] @ K[:s])) if s else f(y)
        y = y + h * (B @ K)
    return y


def conservation_residual(traj: Trajectory, Fs) -> float:
    """Max relative drift ``|F(x(t)) - F(x0)| / scale`` over samples and integrals."""
    worst = 0.0
    for F in Fs:
        ev = _Poly(F) if isinstance(F, TruncatedSeries) else F
        vals = np.array([ev(y) for y in traj.y])
        scale = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
        worst = max(worst, float(np.max(np.abs(vals - vals[0]))) / scale)
    return worst


# ------------------------------------------------------------ periods


@dataclass(frozen=True)
class PeriodEstimate:
    x0: tuple
    T: float
    return_distance: float
    normal: tuple
    crossing_speed: float
    expected: float

    def to_dict(self):
        return asdict(self)


def detect_period(f: NumericField, x0, T0: float, *, rtol: float = 1e-12, atol: float = 1e-14,
                  tol: float = 1e-10, return_tol: float = 1e-6, max_factor: float = 3.0,
                  ball: float | None = 1e3) -> PeriodEstimate:
    """First positive return to the hyperplane through ``x0`` orthogonal to ``f(x0)``.

    Crossings are bracketed on accepted steps and refined with ``brentq`` on
    the step's dense interpolant.  Returns far from ``x0`` (relative to
    ``return_tol |x0|``) are skipped; none within ``max_factor T0`` raises.
    """
    x0 = np.asarray(x0, dtype=float)
    v = f(x0)
    vv = float(v @ v)
    if vv == 0.0:
        raise NoReturn("x0 is an equilibrium")
    radius = max(float(np.linalg.norm(x0)), 1e-300)

    def section(y):
        return float((y - x0) @ v)

    def stop(t0, t1, interp):
        s0, s1 = section(interp(t0)), section(interp(t1))
        if not (s0 < 0.0 <= s1):
            return None
        t = brentq(lambda s: section(interp(s)), t0, t1, xtol=tol * 1e-3, rtol=4 * np.finfo(float).eps)
        y = interp(t)
        speed = float(f(y) @ v)
        if speed <= GRAZING * vv:
            return None
        dist = float(np.linalg.norm(y - x0))
        if dist > return_tol * radius:
            return None
        return PeriodEstimate(tuple(x0.tolist()), float(t), dist, tuple((v / math.sqrt(vv)).tolist()),
                              speed / vv, float(T0))

    try:
        _, est = _solve(f, x0, max_factor * T0, rtol, atol, ball, np.inf, stop)
    except LeftDomain as exc:
        raise NoReturn(f"no return: {exc}") from exc
    if est is None:
        raise NoReturn(f"no positive section return within {max_factor} x {T0:.6g}")
    return est


# ------------------------------------------------------------ residual curves


def fit_slope(radii, values) -> float:
    """Least-squares slope of ``log values`` against ``log radii`` over positive values."""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = v > 0
    if keep.sum() < 2:
        return math.inf
    return float(np.polyfit(np.log(r[keep]), np.log(v[keep]), 1)[0])


@dataclass(frozen=True)
class ResidualCurve:
    name: str
    radii: tuple
    values: tuple
    slope: float
    threshold: float
    saturated: bool
    passed: bool

    def __post_init__(self):
        r = self.radii
        if any(b >= a for a, b in zip(r, r[1:])):
            raise ValueError("radii must be strictly decreasing")
        if any(v < 0 for v in self.values):
            raise ValueError("residual norms must be nonnegative")

    def to_dict(self):
        d = asdict(self)
        d["radii"] = list(self.radii)
        d["values"] = list(self.values)
        if math.isinf(self.slope):
            d["slope"] = "inf"
        return d

    def rows(self):
        return list(zip(self.radii, self.values))


def _ladder(radii):
    r = tuple(sorted((float(x) for x in radii), reverse=True))
    if len(r) < 2 or r[-1] <= 0:
        raise ValueError("need at least two positive radii")
    return r


def period_flatness_scan(f: NumericField, lam: float, radii, *, p: float = 4.0, direction=None,
                         m: int = 1, noise_floor: float = NOISE_FLOOR, name: str = "period",
                         **period_kw) -> ResidualCurve:
    """Deviation ``|T(r) - 2 pi / (m lam)|`` along a radius ladder.

    PASS when the fitted slope is at least ``p``, or when every deviation sits
    below ``noise_floor`` relative to the linear period (the slope is then
    meaningless and the deviation is treated as saturated at float noise).
    """
    radii = _ladder(radii)
    T0 = 2 * math.pi / (m * lam)
    d = np.zeros(f.n)
    d[0] = 1.0
    u = np.asarray(direction, dtype=float) if direction is not None else d
    u = u / np.linalg.norm(u)

    def one(r):
        return abs(detect_period(f, r * u, T0, **period_kw).T - T0)

    devs = tuple(float(x) for x in _ordered_map(one, radii))
    slope = fit_slope(radii, devs)
    saturated = max(devs) <= noise_floor * T0
    return ResidualCurve(name, radii, devs, slope, p, saturated, saturated or slope >= p)


def _exact_point(x):
    return [mpq(float(v)) for v in x]


def _eval_exact(s: TruncatedSeries, table):
    total = ZERO
    for exp, c in s.items():
        term = c
        for j, e in enumerate(exp):
            if e:
                term = term * table[j][e]
        total = total + term
    return total


def _power_rows(pt, top):
    rows = []
    for v in pt:
        row = [mpq(1)]
        for _ in range(top):
            row.append(row[-1] * v)
        rows.append(row)
    return rows


def _sphere_samples(n, samples, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, n))
    return u / np.linalg.norm(u, axis=1)[:, None]


def conjugacy_residual_scan(sys, nf, radii, samples: int = 8, seed: int = 0, *, exact: bool = True,
                            slack: float = 0.5, name: str = "conjugacy") -> ResidualCurve:
    """Max over sample points of ``|DPhi(x) X(x) - F(Phi(x)) X1(Phi(x))|`` per radius.

    Sample points are floats; with ``exact`` the polynomial remainder is then
    evaluated in rationals so that residuals far below ``eps |x|`` survive.
    The same seeded directions are reused at every radius.  PASS when the
    slope is at least ``N + slack``.
    """
    X = sys.X if hasattr(sys, "X") else sys
    n = X.nvars
    N = nf.residual_order
    phi = list(nf.phi)
    jac = PolyMap(phi).jacobian()
    F, X1 = nf.F, nf.linear_part
    lin = [[X1[i].coeff(tuple(1 if k == j else 0 for k in range(n))) for j in range(n)] for i in range(n)]
    radii = _ladder(radii)
    dirs = _sphere_samples(n, samples, seed)
    polys = list(X) + phi + [q for row in jac for q in row] + [F]
    top = max((int(max(e)) for s in polys for e, _ in s.items() if e), default=1)

    if exact:
        def residual(x):
            table = _power_rows(_exact_point(x), top)
            Xv = [_eval_exact(c, table) for c in X]
            y = [_eval_exact(c, table) for c in phi]
            Fy = _eval_exact(F, _power_rows(y, F.max_degree() or 1))
            out = []
            for i in range(n):
                acc = ZERO
                for j in range(n):
                    if not jac[i][j].is_zero():
                        acc = acc + _eval_exact(jac[i][j], table) * Xv[j]
                lin_i = ZERO
                for j in range(n):
                    if lin[i][j]:
                        lin_i = lin_i + lin[i][j] * y[j]
                out.append(acc - Fy * lin_i)
            return math.sqrt(sum(float(abs(v) if not isinstance(v, QI) else abs(complex(v))) ** 2
                                 for v in out))
    else:
        Xf = [_Poly(c) for c in X]
        Pf = [_Poly(c) for c in phi]
        Jf = [[_Poly(q) for q in row] for row in jac]
        Ff = _Poly(F)
        L = np.array([[float(v) for v in row] for row in lin])

        def residual(x):
            Xv = np.array([c(x) for c in Xf])
            y = np.array([c(x) for c in Pf])
            J = np.array([[q(x) for q in row] for row in Jf])
            return float(np.linalg.norm(J @ Xv - Ff(y) * (L @ y)))

    def at_radius(r):
        return max(residual(r * u) for u in dirs)

    vals = tuple(float(v) for v in _ordered_map(at_radius, radii))
    slope = fit_slope(radii, vals)
    threshold = N + slack
    saturated = max(vals) == 0.0
    return ResidualCurve(name, radii, vals, slope, threshold, saturated, saturated or slope >= threshold)


# ------------------------------------------------------------ planar locus


@dataclass(frozen=True)
class LocusScan:
    y: tuple
    x: tuple
    field_norms: tuple
    max_field_norm: float
    smoothness: float  # max second divided difference of x(y)

    def to_dict(self):
        return asdict(self)

    def rows(self):
        return list(zip(self.y, self.x, self.field_norms))


def singular_locus_scan_2d(f: NumericField, ygrid, *, cone: float = 1.0) -> LocusScan:
    """Roots of the first component in the cone ``|x| <= cone |y|`` along ``ygrid``."""
    if f.n != 2:
        raise ValueError("singular_locus_scan_2d needs a planar field")
    ys = sorted(float(v) for v in ygrid)
    xs, norms = [], []
    for y in ys:
        if y == 0.0:
            x = 0.0
            if f(np.array([0.0, 0.0]))[0] != 0.0:
                raise RootNotBracketed("first component nonzero at the origin")
        else:
            w = cone * abs(y)

            def g(x, y=y):
                return float(f(np.array([x, y]))[0])

            ga, gb = g(-w), g(w)
            if ga == 0.0:
                x = -w
            elif gb == 0.0:
                x = w
            elif ga * gb > 0:
                raise RootNotBracketed(f"no sign change of the first component in the cone at y={y:g}")
            else:
                x = brentq(g, -w, w, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
        xs.append(float(x))
        norms.append(float(np.linalg.norm(f(np.array([x, y])))))
    smooth = 0.0
    for i in range(1, len(ys) - 1):
        h0, h1 = ys[i] - ys[i - 1], ys[i + 1] - ys[i]
        dd = 2 * ((xs[i + 1] - xs[i]) / h1 - (xs[i] - xs[i - 1]) / h0) / (h0 + h1)
        smooth = max(smooth, abs(dd))
    return LocusScan(tuple(ys), tuple(xs), tuple(norms), max(norms) if norms else 0.0, smooth)


# ------------------------------------------------------------ outputs


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def write_json(path, record):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, sort_keys=True, indent=2)
        fh.write("\n")
