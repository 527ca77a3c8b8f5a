"""Seeded random systems of the form ``Psi_* (F0 X1)`` for round-trip testing."""
from __future__ import annotations

import random
from dataclasses import dataclass

from gmpy2 import mpq

from .invariants import hilbert_basis, invariant_generators
from .series import PolyMap, TruncatedSeries, VectorFieldJet, monomials, mul_truncated, pushforward
from .spectrum import Case, SpectrumClass, canonical_matrix

__all__ = ["RandomInstance", "LINEAR_MENU", "random_instance", "random_invariant", "random_near_identity"]

# (case, m) menus per dimension; m in the classifier's canonical ordering
LINEAR_MENU = {
    2: [(Case.STRONG_HYPERBOLIC, (1, -1)), (Case.STRONG_HYPERBOLIC, (2, -3)),
        (Case.STRONG_ELLIPTIC, (1, -1))],
    3: [(Case.STRONG_HYPERBOLIC, (1, 1, -2)), (Case.STRONG_HYPERBOLIC, (2, -1, -1)),
        (Case.WEAK_HYPERBOLIC, (0, 1, -1)), (Case.WEAK_ELLIPTIC, (0, 1, -1))],
    4: [(Case.STRONG_ELLIPTIC, (1, -1, 2, -2)), (Case.STRONG_ELLIPTIC, (1, -1, 1, -1)),
        (Case.STRONG_HYPERBOLIC, (2, 1, -1, -2)), (Case.WEAK_HYPERBOLIC, (0, 0, 1, -1)),
        (Case.WEAK_ELLIPTIC, (0, 0, 1, -1))],
}


@dataclass(frozen=True)
class RandomInstance:
    X: VectorFieldJet
    X1: VectorFieldJet
    F0: TruncatedSeries
    psi: PolyMap
    cls: SpectrumClass
    invariants: tuple  # real invariant generators


def _coeff(rng):
    return mpq(rng.choice([-2, -1, 1, 2]), rng.choice([1, 2, 3]))


def random_invariant(rng, gens, nvars, order, max_terms=4):
    """``1 + sum c Q^beta`` over random products of the generators."""
    F = TruncatedSeries.constant(nvars, order, 1)
    for _ in range(rng.randint(1, max_terms)):
        term = TruncatedSeries.constant(nvars, order, _coeff(rng))
        for _ in range(rng.randint(1, 2)):
            term = mul_truncated(term, rng.choice(gens))
        F = F + term
    return F


def random_near_identity(rng, nvars, order, max_degree=3, density=0.3):
    comps = []
    for i in range(nvars):
        terms = {tuple(1 if k == i else 0 for k in range(nvars)): 1}
        for d in range(2, min(max_degree, order) + 1):
            for e in monomials(nvars, d):
                if rng.random() < density:
                    terms[e] = _coeff(rng)
        comps.append(TruncatedSeries(nvars, order, terms))
    return PolyMap(comps)


def random_instance(n: int, order: int, seed: int, *, lam: int | None = None) -> RandomInstance:
    rng = random.Random(seed)
    case, m = rng.choice(LINEAR_MENU[n])
    scale = lam if lam is not None else rng.choice([1, 2, 3])
    k = sum(1 for v in m if v == 0)
    cls = SpectrumClass(case, k, m, float(scale))
    hb = hilbert_basis(m)
    gens = invariant_generators(cls, hb, order=order).real_forms
    A = [[mpq(scale) * v for v in row] for row in canonical_matrix(m, case.elliptic)]
    X1 = VectorFieldJet.from_matrix(A, order)
    F0 = random_invariant(rng, gens, n, order)
    psi = random_near_identity(rng, n, order)
    X = pushforward(X1.times(F0), psi)
    return RandomInstance(X, X1, F0, psi, cls, gens)
