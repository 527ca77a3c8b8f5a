"""Degree-by-degree geometric linearization ``Phi_* X = F X1``.

An exact linear change brings the linear part to canonical real form.  In
complexified diagonal coordinates the homological operator ``[., D]`` acts
on ``x^a d_j`` by ``<a, mu> - mu_j``, so at each degree the nonresonant terms
are removed by exact division (never by a small number) and the resonant
terms must equal ``F_{d-1} D`` for a polynomial first integral ``F_{d-1}``
of ``D``.  Anything left over is an obstruction: the input is not of the
form ``F X1`` at that order.

Only homogeneous slices visit the diagonal frame.  The working field, the
Lie generators and ``Phi`` stay real, which keeps the bulk of the
arithmetic in rationals instead of Gaussian rationals.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from gmpy2 import mpq

from .exact import ZERO, is_real, solve_lex_first
from .integrability import IntegrableSystem, check_nondegeneracy
from .invariants import (
    HilbertBasis,
    InvariantGenerators,
    complexification,
    diagonal_eigenvalues,
    express_in_invariants,
    hilbert_basis,
    invariant_generators,
)
from .series import (
    PolyMap,
    TruncatedSeries,
    VectorFieldJet,
    _accumulate,
    compose_many,
    compose_series,
    flow_pullback,
    flow_pushforward,
    invert_map,
    lie_derivative,
    monomials,
    mul_truncated,
    pushforward,
)
from .spectrum import (
    CanonicalForm,
    NotCanonicalizable,
    SpectrumClass,
    SpectrumError,
    canonical_matrix,
    canonicalize_linear_part,
    classify_matrix,
    semisimplicity_check,
)

__all__ = [
    "HypothesisViolation",
    "ObstructionNonzero",
    "TransportAnnihilationFailed",
    "Obstruction",
    "PDStep",
    "HomologicalSystem",
    "FactorStep",
    "DegreeRecord",
    "GeometricNormalForm",
    "NormalFormCheck",
    "TransportResult",
    "homological_eigenvalue",
    "pd_step",
    "factor_extract",
    "geometric_normalize",
    "conjugacy_defect",
    "verify_normal_form",
    "first_integral_transport",
]


class HypothesisViolation(ValueError):
    pass


class TransportAnnihilationFailed(AssertionError):
    pass


@dataclass(frozen=True)
class Obstruction:
    degree: int
    leftover: VectorFieldJet

    def terms(self):
        return [(j, e, c) for j, comp in enumerate(self.leftover) for e, c in comp.items()]


class ObstructionNonzero(ValueError):
    def __init__(self, obstruction: Obstruction):
        self.obstruction = obstruction
        super().__init__(f"resonant terms at degree {obstruction.degree} are not of the form F X1")


def homological_eigenvalue(alpha, j, m) -> int:
    """``<alpha, m> - m_j``: eigenvalue of ``ad`` of the linear part on ``x^alpha d_j``."""
    return sum(a * b for a, b in zip(alpha, m)) - m[j]


def _diag_field(mu, order):
    n = len(mu)
    return VectorFieldJet.from_matrix([[mu[i] if i == j else ZERO for j in range(n)] for i in range(n)], order)


def _check_diagonal(current: VectorFieldJet, mu):
    n = current.nvars
    want = [[mu[i] if i == j else ZERO for j in range(n)] for i in range(n)]
    if current.linear_part != want:
        raise ValueError("working field is not in diagonal coordinates with the given eigenvalues")


def _scale_of(m, mu):
    """Common factor ``s`` with ``mu = s * m``."""
    for a, b in zip(m, mu):
        if a:
            return b / a
    raise ValueError("m has no nonzero entry")


@dataclass(frozen=True)
class PDStep:
    degree: int
    change: VectorFieldJet  # h in the convention x = y + h(y)
    generator: VectorFieldJet  # Lie generator -h whose time-1 flow removes the terms
    resonant: VectorFieldJet
    divisors: tuple  # integer homological eigenvalues used


def pd_step(current: VectorFieldJet, d: int, m, *, mu=None) -> PDStep:
    """Split the degree-``d`` part of a diagonal-coordinate field.

    Nonresonant terms ``c x^a d_j`` give ``h = c / (<a, mu> - mu_j)``;
    resonant terms are returned untouched.  ``mu`` defaults to ``m``.
    """
    m = tuple(int(v) for v in m)
    mu = [mpq(v) for v in m] if mu is None else list(mu)
    _check_diagonal(current, mu)
    s = _scale_of(m, mu)
    n, order = current.nvars, current.order
    h, res, divisors = [], [], []
    for j, comp in enumerate(current):
        hj, rj = {}, {}
        for alpha, c in comp.homogeneous(d).items():
            e = homological_eigenvalue(alpha, j, m)
            if e == 0:
                rj[alpha] = c
                continue
            assert abs(e) >= 1
            divisors.append(e)
            hj[alpha] = c / (s * e)
        h.append(TruncatedSeries(n, order, hj))
        res.append(TruncatedSeries(n, order, rj))
    change = VectorFieldJet(h)
    return PDStep(d, change, -change, VectorFieldJet(res), tuple(divisors))


@dataclass(frozen=True)
class HomologicalSystem:
    degree: int
    unknowns: tuple
    rows: tuple
    matrix: tuple
    rhs: tuple
    solution: tuple
    consistent: bool


@dataclass(frozen=True)
class FactorStep:
    increment: TruncatedSeries
    leftover: VectorFieldJet
    system: HomologicalSystem


def _monoid_elements(m, degree, gens=None):
    """Solutions of ``<b, m> = 0`` with ``|b| = degree`` in descending lex order."""
    if gens is None:
        return [b for b in monomials(len(m), degree) if sum(x * y for x, y in zip(b, m)) == 0]
    gen_vecs = list(gens.generators if isinstance(gens, HilbertBasis) else gens.monomials)
    out = {(0,) * len(m)} if degree == 0 else set()
    frontier = {(0,) * len(m)}
    while frontier:
        nxt = set()
        for b in frontier:
            for g in gen_vecs:
                c = tuple(x + y for x, y in zip(b, g))
                if sum(c) < degree:
                    nxt.add(c)
                elif sum(c) == degree:
                    out.add(c)
        frontier = nxt
    return sorted(out, reverse=True)


def factor_extract(R: VectorFieldJet, gens, m, *, mu=None) -> FactorStep:
    """Solve ``F_{d-1} D + (resonant change effect) = R_d`` exactly.

    ``R`` must be purely resonant and homogeneous of one degree.  Unknowns are
    the coefficients of ``F_{d-1}`` on invariant monomials, followed by the
    resonant change coefficients; in diagonal coordinates a resonant change
    commutes with ``D`` so its columns are zero and the lexicographically
    first solution sets it to zero.  The leftover ``R - F_{d-1} D`` is the
    obstruction (zero when the system is consistent).
    """
    m = tuple(int(v) for v in m)
    mu = [mpq(v) for v in m] if mu is None else list(mu)
    n, order = R.nvars, R.order
    d = R.lowest_degree()
    if d is None:
        zero = TruncatedSeries.zero(n, order)
        return FactorStep(zero, R, HomologicalSystem(0, (), (), (), (), (), True))
    if any(c.max_degree() not in (None, d) for c in R):
        raise ValueError("resonant part must be homogeneous")
    for j, comp in enumerate(R):
        for alpha, _ in comp.items():
            if homological_eigenvalue(alpha, j, m) != 0:
                raise ValueError(f"term x^{alpha} d_{j} is not resonant")
    betas = _monoid_elements(m, d - 1, gens)
    res_changes = [(alpha, j) for j in range(n) for alpha in monomials(n, d)
                   if homological_eigenvalue(alpha, j, m) == 0]
    unknowns = tuple(("F", b) for b in betas) + tuple(("change", a, j) for a, j in res_changes)
    row_keys = set()
    for j, comp in enumerate(R):
        row_keys.update((j, e) for e in comp.terms)
    for b in betas:
        for j in range(n):
            if mu[j]:
                row_keys.add((j, tuple(x + (1 if t == j else 0) for t, x in enumerate(b))))
    rows = sorted(row_keys, key=lambda r: (r[0], tuple(-x for x in r[1])))
    index = {r: i for i, r in enumerate(rows)}
    A = [[ZERO] * len(unknowns) for _ in rows]
    for col, b in enumerate(betas):
        for j in range(n):
            if mu[j]:
                e = tuple(x + (1 if t == j else 0) for t, x in enumerate(b))
                A[index[(j, e)]][col] = mu[j]
    rhs = [R[j].coeff(e) for j, e in rows]
    x, ok = solve_lex_first(A, rhs) if rows else ([ZERO] * len(unknowns), True)
    inc = TruncatedSeries(n, order, {b: v for b, v in zip(betas, x) if v})
    D = _diag_field(mu, order)
    leftover = R - D.times(inc)
    system = HomologicalSystem(d, unknowns, tuple(rows), tuple(tuple(r) for r in A), tuple(rhs), tuple(x), ok)
    if ok != leftover.is_zero():
        raise AssertionError("substitution check disagrees with the linear solve")
    return FactorStep(inc, leftover, system)


@dataclass(frozen=True)
class DegreeRecord:
    degree: int
    removed: int
    resonant: int
    agrees_through: bool


@dataclass(frozen=True)
class GeometricNormalForm:
    phi: PolyMap
    F: TruncatedSeries
    linear_part: VectorFieldJet
    cls: SpectrumClass
    canonical: CanonicalForm
    residual_order: int
    obstruction: Obstruction | None = None
    F_hat: TruncatedSeries | None = None
    generators: tuple = ()
    trace: tuple = field(default=(), compare=False)

    @property
    def accepted(self):
        return self.obstruction is None

    @property
    def lam(self):
        return self.canonical.scale


def _as_system(sys):
    if isinstance(sys, IntegrableSystem):
        return sys.X, sys
    if isinstance(sys, VectorFieldJet):
        return sys, None
    raise TypeError(f"expected IntegrableSystem or VectorFieldJet, got {type(sys).__name__}")


def analyze_linear_part(X: VectorFieldJet):
    """Classification and exact canonical form, or :class:`HypothesisViolation`."""
    A = X.linear_part
    if not all(is_real(v) for row in A for v in row):
        raise HypothesisViolation("linear part must be real")
    if not semisimplicity_check(A):
        raise HypothesisViolation("linear part is not semisimple (nilpotent part present)")
    try:
        cls = classify_matrix(A)
    except SpectrumError as exc:
        raise HypothesisViolation(f"spectrum outside the four admissible cases: {type(exc).__name__}: {exc}") from None
    try:
        canon = canonicalize_linear_part(A, cls)
    except NotCanonicalizable as exc:
        raise HypothesisViolation(f"linear part not canonicalizable over the rationals: {exc}") from None
    return cls, canon


# powers of linear forms keyed by (matrix, order); values are immutable
_POWER_TABLES: dict = {}


def _linear_transport(C, Ci, order):
    """Maps sending a field to ``w = C x`` coordinates and back (``V -> C V(C^{-1} w)``).

    The powers of the substituted linear forms are memoised across calls,
    since every degree of the normalization reuses them.
    """
    n = len(C)
    ident = all(C[i][j] == (1 if i == j else 0) for i in range(n) for j in range(n))

    def move(A, B):
        forms = PolyMap.from_matrix(B, order).components
        key = (tuple(tuple(r) for r in B), order)
        table = _POWER_TABLES.get(key)
        if table is None:
            table = _POWER_TABLES[key] = {(0,) * n: TruncatedSeries.constant(n, order, 1)}

        def power(alpha):
            hit = table.get(alpha)
            if hit is None:
                j = max(i for i, e in enumerate(alpha) if e)
                prev = list(alpha)
                prev[j] -= 1
                hit = mul_truncated(power(tuple(prev)), forms[j])
                table[alpha] = hit
            return hit

        def apply(V):
            if ident:
                return V
            comps = []
            for comp in V:
                buckets = [dict() for _ in range(order + 1)]
                for alpha, c in comp.items():
                    _accumulate(buckets, power(alpha), c)
                comps.append(TruncatedSeries._from_buckets(n, order, buckets))
            out = []
            for row in A:
                buckets = [dict() for _ in range(order + 1)]
                for a, c in zip(row, comps):
                    if a:
                        _accumulate(buckets, c, a)
                out.append(TruncatedSeries._from_buckets(n, order, buckets))
            return VectorFieldJet(out)

        return apply

    return move(C, Ci), move(Ci, C)


def _real_field(V: VectorFieldJet) -> VectorFieldJet:
    if not V.is_real():
        raise AssertionError("expected a real vector field after leaving the diagonal frame")
    return V.real()


def geometric_normalize(sys, N: int | None = None, *, strict: bool = True, check_hypotheses: bool = True,
                        express: bool = False, trace: bool = False) -> GeometricNormalForm:
    """Find ``Phi`` (polynomial, order ``N``) and ``F`` with ``Phi_* X = F X1`` through degree ``N``.

    ``sys`` may be an :class:`IntegrableSystem` (hypotheses i-iii are checked
    first when ``check_hypotheses``) or a bare jet (only the linear-part
    hypotheses are checked).  With ``strict`` an obstruction raises
    :class:`ObstructionNonzero`; otherwise it is recorded and the result is
    valid through the last unobstructed degree.
    """
    X, integ = _as_system(sys)
    if N is None:
        N = X.order
    if N > X.order:
        raise ValueError(f"cannot normalize to order {N} from a jet of order {X.order}")
    if N < X.order:
        X = X.with_order(N)
    cls, canon = analyze_linear_part(X)
    if integ is not None and check_hypotheses:
        rep = check_nondegeneracy(integ)
        if not rep.ok:
            raise HypothesisViolation("; ".join(rep.messages) or "nondegeneracy check failed")
    n = X.nvars
    lam = canon.scale
    C, Ci = complexification(cls)
    to_c, to_r = _linear_transport(C, Ci, N)
    # heavy arithmetic stays real: the field lives in real canonical
    # coordinates and only homogeneous slices visit the diagonal frame
    Yr = pushforward(X, PolyMap.from_matrix([list(r) for r in canon.T_inv], N))
    X1 = VectorFieldJet.from_matrix([[lam * v for v in row] for row in canonical_matrix(cls.m, cls.elliptic)], N)
    mu = [lam * v for v in diagonal_eigenvalues(cls)]
    D = _diag_field(mu, N)
    hb = hilbert_basis(cls.m)
    F = TruncatedSeries.constant(n, N, 1)
    gens, records = [], []
    obstruction = None
    done = N
    for d in range(2, N + 1):
        Wd = D + to_c(Yr.homogeneous(d))
        step = pd_step(Wd, d, cls.m, mu=mu)
        if not step.generator.is_zero():
            P = _real_field(to_r(step.generator))
            Yr = flow_pushforward(Yr, P)
            gens.append(P)
        # the flow changes degree d only through [P, X1], which cancels
        # exactly the nonresonant terms
        R = step.resonant
        fx = factor_extract(R, hb, cls.m, mu=mu)
        if not fx.leftover.is_zero():
            obstruction = Obstruction(d, _real_field(to_r(fx.leftover)))
            if strict:
                raise ObstructionNonzero(obstruction)
            done = d - 1
            break
        inc = compose_series(fx.increment, PolyMap.from_matrix(C, N))
        if not inc.is_real():
            raise AssertionError("factor increment is not real")
        F = F + inc.real()
        if trace:
            agrees = Yr.truncate(d) == X1.times(F).truncate(d)
            records.append(DegreeRecord(d, len(step.divisors), sum(len(c) for c in R), agrees))
    # Phi = exp(P_N) o ... o exp(P_2) o T^{-1}, assembled by pulling coordinates back
    coords = [TruncatedSeries.variable(n, N, i) for i in range(n)]
    for P in reversed(gens):
        coords = [flow_pullback(c, P) for c in coords]
    phi = PolyMap(compose_many(coords, PolyMap.from_matrix([list(r) for r in canon.T_inv], N)))
    F_real = F
    if done < N:
        phi = PolyMap([c.truncate(done) for c in phi])
        F_real = F_real.truncate(done - 1)
    F_hat = None
    if express and obstruction is None:
        ig = invariant_generators(cls, hb, order=N)
        F_hat = express_in_invariants(F_real, ig)
    return GeometricNormalForm(phi, F_real, X1, cls, canon, done, obstruction, F_hat,
                               tuple(gens), tuple(records))


def conjugacy_defect(X: VectorFieldJet, phi: PolyMap, F: TruncatedSeries, X1: VectorFieldJet) -> VectorFieldJet:
    """``DPhi . X - (F X1) o Phi``: zero through N exactly when ``Phi_* X = F X1`` through N.

    Needs no map inversion, which makes it the cheap form of the check.
    """
    n = X.nvars
    jac = phi.jacobian()
    FX1 = X1.times(F)
    pulled = compose_many(list(FX1.components), phi)
    out = []
    for i in range(n):
        acc = -pulled[i]
        for j in range(n):
            if not jac[i][j].is_zero() and not X[j].is_zero():
                acc = acc + mul_truncated(jac[i][j], X[j])
        out.append(acc)
    return VectorFieldJet(out)


@dataclass(frozen=True)
class NormalFormCheck:
    residual: VectorFieldJet
    F_at_origin: object
    annihilation: TruncatedSeries

    @property
    def ok(self):
        return self.residual.is_zero() and self.F_at_origin == 1 and self.annihilation.is_zero()


def verify_normal_form(sys, nf: GeometricNormalForm, *, method: str = "pushforward") -> NormalFormCheck:
    """Independent recomputation of the residual, ``F(O)`` and ``X1(F)``.

    ``method="pushforward"`` returns ``Phi_* X - F X1``; ``"defect"`` returns
    the inversion-free :func:`conjugacy_defect`.  Both vanish through the
    residual order exactly together.
    """
    X, _ = _as_system(sys)
    N = nf.residual_order
    X = X.with_order(N)
    phi = PolyMap([c.with_order(N) for c in nf.phi])
    F = nf.F.with_order(N)
    X1 = nf.linear_part.with_order(N)
    if method == "pushforward":
        residual = pushforward(X, phi) - X1.times(F)
    elif method == "defect":
        residual = conjugacy_defect(X, phi, F, X1)
    else:
        raise ValueError(f"unknown method {method!r}")
    return NormalFormCheck(residual, F.constant_term, lie_derivative(X1, F))


@dataclass(frozen=True)
class TransportResult:
    integrals: tuple
    annihilated: tuple
    expressed: tuple | None = None


def first_integral_transport(sys: IntegrableSystem, nf: GeometricNormalForm, *,
                             gens: InvariantGenerators | None = None) -> TransportResult:
    """Integrals in the normal-form coordinates, ``F_i o Phi^{-1}``, checked against ``F X1``."""
    N = nf.residual_order
    phi = PolyMap([c.with_order(N) for c in nf.phi])
    psi = invert_map(phi)
    field_nf = nf.linear_part.with_order(N).times(nf.F.with_order(N))
    out, flags = [], []
    for f in sys.first_integrals:
        g = compose_series(f.with_order(N), psi)
        ok = lie_derivative(field_nf, g).is_zero()
        if not ok:
            raise TransportAnnihilationFailed("transported integral is not annihilated by F X1")
        out.append(g)
        flags.append(ok)
    expressed = None
    if gens is not None:
        expressed = tuple(express_in_invariants(g, gens) for g in out)
    return TransportResult(tuple(out), tuple(flags), expressed)
