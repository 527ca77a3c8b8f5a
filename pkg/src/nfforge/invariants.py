"""Resonance monoid, monomial invariants of the linear part and their real forms.

Invariants live naturally in complexified diagonal coordinates: real
coordinates on hyperbolic and zero directions, and ``z = x + i y``,
``w = x - i y`` on each rotation plane.  There the linear field is diagonal
with eigenvalues ``m_j`` (hyperbolic) or ``i m_j`` (elliptic) and a monomial
``z^a`` is a first integral iff ``<a, m> = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from gmpy2 import mpq

from .exact import I, ONE, QI, ZERO, solve_lex_first
from .series import PolyMap, TruncatedSeries, VectorFieldJet, compose_series, lie_derivative, mul_truncated
from .spectrum import SpectrumClass, canonical_matrix

__all__ = [
    "ResonanceProblem",
    "HilbertBasis",
    "InvariantGenerators",
    "DegreeCapExceeded",
    "NotInvariant",
    "NoRepresentation",
    "hilbert_basis",
    "invariant_generators",
    "express_in_invariants",
    "complexification",
    "diagonal_eigenvalues",
    "elliptic_pairs",
    "conjugate_exponent",
]


class DegreeCapExceeded(RuntimeError):
    pass


class NotInvariant(ValueError):
    pass


class NoRepresentation(ValueError):
    pass


@dataclass(frozen=True)
class ResonanceProblem:
    m: tuple

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))
        if not any(self.m):
            raise ValueError("resonance vector must have a nonzero entry")


@dataclass(frozen=True)
class HilbertBasis:
    m: tuple
    generators: tuple

    def __iter__(self):
        return iter(self.generators)

    def __len__(self):
        return len(self.generators)


def _canonical_sort(vectors):
    return tuple(sorted(vectors, key=lambda a: (sum(a), tuple(-x for x in a))))


def hilbert_basis(p, degree_cap: int = 24) -> HilbertBasis:
    """Minimal generators of ``{a >= 0 : <a, m> = 0}``.

    Completion in the Contejean-Devie style: grow candidates one unit at a
    time, always in a direction that moves ``<a, m>`` toward zero, record
    candidates that hit zero, and discard any candidate dominating a
    recorded solution.  The frontier empties on its own for a single
    relation; a frontier still alive beyond ``degree_cap`` raises.
    """
    m = p.m if isinstance(p, ResonanceProblem) else ResonanceProblem(tuple(p)).m
    if degree_cap < 1:
        raise ValueError("degree_cap must be >= 1")
    n = len(m)
    units = [tuple(1 if k == i else 0 for k in range(n)) for i in range(n)]
    basis = [units[i] for i in range(n) if m[i] == 0]
    pos = [i for i in range(n) if m[i] > 0]
    neg = [i for i in range(n) if m[i] < 0]
    frontier = {units[i] for i in pos + neg} if pos and neg else set()
    found = []
    level = 1
    while frontier:
        if level > degree_cap:
            raise DegreeCapExceeded(
                f"Hilbert basis for m={m} not saturated at degree cap {degree_cap}")
        nxt = set()
        for a in sorted(frontier):
            d = sum(x * y for x, y in zip(a, m))
            if d == 0:
                found.append(a)
                continue
            for j in (neg if d > 0 else pos):
                b = list(a)
                b[j] += 1
                b = tuple(b)
                if not any(all(x >= y for x, y in zip(b, s)) for s in found):
                    nxt.add(b)
        frontier = nxt
        level += 1
    return HilbertBasis(tuple(m), _canonical_sort(basis + found))


# ------------------------------------------------------ coordinate helpers


def elliptic_pairs(cls: SpectrumClass):
    """Index pairs ``(p, p+1)`` of rotation planes in canonical coordinates."""
    if not cls.elliptic:
        return []
    pairs = []
    i = 0
    while i < cls.n:
        if cls.m[i] == 0:
            i += 1
        else:
            pairs.append((i, i + 1))
            i += 2
    return pairs


def diagonal_eigenvalues(cls: SpectrumClass):
    """Eigenvalues (``lam`` factored out) in complexified diagonal coordinates."""
    if cls.elliptic:
        return [QI(0, v) if v else ZERO for v in cls.m]
    return [mpq(v) for v in cls.m]


def complexification(cls: SpectrumClass):
    """Matrices ``(C, C_inv)`` with complex coordinates ``z = C x``."""
    n = cls.n
    C = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]
    Ci = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]
    half = mpq(1, 2)
    for p, q in elliptic_pairs(cls):
        C[p][p], C[p][q] = ONE, I
        C[q][p], C[q][q] = ONE, -I
        Ci[p][p], Ci[p][q] = half, half
        Ci[q][p], Ci[q][q] = QI(0, -half), QI(0, half)
    return C, Ci


def conjugate_exponent(cls: SpectrumClass, exp):
    e = list(exp)
    for p, q in elliptic_pairs(cls):
        e[p], e[q] = e[q], e[p]
    return tuple(e)


@dataclass(frozen=True)
class InvariantGenerators:
    cls: SpectrumClass
    monomials: tuple
    real_forms: tuple
    order: int
    labels: tuple = field(default=())

    @property
    def linear_field(self) -> VectorFieldJet:
        """Integer canonical linear field in real coordinates."""
        return VectorFieldJet.from_matrix(canonical_matrix(self.cls.m, self.cls.elliptic), self.order)

    @property
    def diagonal_field(self) -> VectorFieldJet:
        mu = diagonal_eigenvalues(self.cls)
        n = self.cls.n
        return VectorFieldJet.from_matrix(
            [[mu[i] if i == j else ZERO for j in range(n)] for i in range(n)], self.order)


def _monomial(n, order, exp, coeff=1):
    return TruncatedSeries(n, order, {tuple(exp): coeff})


def invariant_generators(cls: SpectrumClass, hb: HilbertBasis, order: int | None = None) -> InvariantGenerators:
    """Monomial generators and their real polynomial forms.

    A self-conjugate monomial (for instance ``z w``) contributes one real
    form; a conjugate pair ``M, conj(M)`` contributes ``Re M`` and ``Im M``.
    Every output is checked to be annihilated by the linear field.
    """
    if tuple(hb.m) != tuple(cls.m):
        raise ValueError("Hilbert basis was computed for a different resonance vector")
    n = cls.n
    gens = list(hb.generators)
    if order is None:
        order = max((sum(g) for g in gens), default=1)
    C, _ = complexification(cls)
    to_complex = PolyMap.from_matrix(C, order)
    real_forms = []
    labels = []
    seen = set()
    for g in gens:
        if g in seen:
            continue
        gbar = conjugate_exponent(cls, g)
        seen.update({g, gbar})
        mono = compose_series(_monomial(n, order, g), to_complex)
        if gbar == g:
            parts = [mono]
            labels.append(("abs", g))
        else:
            mono_bar = compose_series(_monomial(n, order, gbar), to_complex)
            parts = [(mono + mono_bar).scale(mpq(1, 2)), (mono - mono_bar).scale(QI(0, mpq(-1, 2)))]
            labels.extend([("re", g), ("im", g)])
        for q in parts:
            if not q.is_real():
                raise AssertionError(f"realification of {g} left an imaginary part")
            real_forms.append(q.real())
    out = InvariantGenerators(cls, tuple(gens), tuple(real_forms), order, tuple(labels))
    lin_r = out.linear_field
    lin_c = out.diagonal_field
    for q in out.real_forms:
        if not lie_derivative(lin_r, q).is_zero():
            raise AssertionError("real invariant is not annihilated by the linear field")
    for g in gens:
        if not lie_derivative(lin_c, _monomial(n, order, g)).is_zero():
            raise AssertionError("monomial invariant is not annihilated by the linear field")
    return out


def _weighted_exponents(weights, degree):
    """Exponent tuples ``b`` with ``sum b_i w_i == degree`` in descending lex order."""
    out = []

    def rec(i, remaining, prefix):
        if i == len(weights):
            if remaining == 0:
                out.append(tuple(prefix))
            return
        w = weights[i]
        for e in range(remaining // w, -1, -1):
            rec(i + 1, remaining - e * w, prefix + [e])

    rec(0, degree, [])
    return out


def express_in_invariants(f: TruncatedSeries, gens: InvariantGenerators, *, basis: str = "real",
                          linear_field: VectorFieldJet | None = None) -> TruncatedSeries:
    """Series ``fhat`` in the generators with ``fhat(Q_1, ..., Q_m) = f`` through order N.

    ``basis`` selects the real forms (real canonical coordinates) or the
    complex monomials (complexified coordinates).  Relations among the
    generators are resolved by taking the lexicographically first solution.
    """
    n, order = f.nvars, f.order
    if basis == "real":
        lin = linear_field or VectorFieldJet.from_matrix(canonical_matrix(gens.cls.m, gens.cls.elliptic), order)
        qs = [q.with_order(order) for q in gens.real_forms]
    elif basis == "complex":
        mu = diagonal_eigenvalues(gens.cls)
        lin = linear_field or VectorFieldJet.from_matrix(
            [[mu[i] if i == j else ZERO for j in range(n)] for i in range(n)], order)
        qs = [_monomial(n, order, g) for g in gens.monomials]
    else:
        raise ValueError(f"unknown basis {basis!r}")
    if not lie_derivative(lin, f).is_zero():
        raise NotInvariant("series is not annihilated by the linear field")
    if not qs:
        if f.max_degree() not in (None, 0):
            raise NoRepresentation("no generators but f is not constant")
        return TruncatedSeries.constant(1, order, f.constant_term)
    weights = [q.lowest_degree() for q in qs]
    if any(w is None or q.max_degree() != w for q, w in zip(qs, weights)):
        raise ValueError("generators must be nonzero homogeneous polynomials")
    nq = len(qs)
    u_order = order // min(weights)
    powers = {(0,) * nq: TruncatedSeries.constant(n, order, 1)}

    def power(beta):
        hit = powers.get(beta)
        if hit is None:
            j = max(i for i, e in enumerate(beta) if e)
            prev = list(beta)
            prev[j] -= 1
            hit = mul_truncated(power(tuple(prev)), qs[j])
            powers[beta] = hit
        return hit

    coeffs = {}
    for d in range(order + 1):
        target = f.homogeneous(d)
        betas = _weighted_exponents(weights, d)
        if not betas:
            if not target.is_zero():
                raise NoRepresentation(f"degree {d} part cannot be built from the generators")
            continue
        cols = [power(b).homogeneous(d) for b in betas]
        rows_idx = sorted({e for c in cols for e in c.terms} | set(target.terms),
                          key=lambda e: tuple(-x for x in e))
        if not rows_idx:
            continue
        A = [[c.coeff(e) for c in cols] for e in rows_idx]
        b = [target.coeff(e) for e in rows_idx]
        x, ok = solve_lex_first(A, b)
        if not ok:
            raise NoRepresentation(f"degree {d} part is not in the span of generator products")
        for beta, v in zip(betas, x):
            if v:
                coeffs[beta] = v
    return TruncatedSeries(nq, u_order, coeffs)
