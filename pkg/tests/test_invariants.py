import itertools

import pytest
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from nfforge.invariants import (
    DegreeCapExceeded,
    NotInvariant,
    ResonanceProblem,
    express_in_invariants,
    hilbert_basis,
    invariant_generators,
)
from nfforge.series import TruncatedSeries, VectorFieldJet, compose_series, lie_derivative, mul_truncated
from nfforge.spectrum import Case, SpectrumClass, canonical_matrix


def solutions(m, bound):
    """All nonzero a >= 0 with <a, m> = 0 and |a| <= bound."""
    n = len(m)
    out = []
    for a in itertools.product(range(bound + 1), repeat=n):
        if 0 < sum(a) <= bound and sum(x * y for x, y in zip(a, m)) == 0:
            out.append(a)
    return out


def irreducible(sols):
    """Brute-force Hilbert basis: solutions that are not a sum of two nonzero solutions."""
    s = set(sols)
    out = []
    for a in sols:
        split = False
        for b in sols:
            if b != a and all(x >= y for x, y in zip(a, b)):
                if tuple(x - y for x, y in zip(a, b)) in s:
                    split = True
                    break
        if not split:
            out.append(a)
    return sorted(out)


def generated(basis, bound, n):
    """Z_+ combinations of the basis with total degree <= bound."""
    reach = {(0,) * n}
    frontier = {(0,) * n}
    while frontier:
        nxt = set()
        for a in frontier:
            for g in basis:
                b = tuple(x + y for x, y in zip(a, g))
                if sum(b) <= bound and b not in reach:
                    reach.add(b)
                    nxt.add(b)
        frontier = nxt
    reach.discard((0,) * n)
    return reach


@pytest.mark.parametrize("m, expected", [
    ((1, -1), [(1, 1)]),
    ((2, -3), [(3, 2)]),
    ((1, 1, -2), [(2, 0, 1), (1, 1, 1), (0, 2, 1)]),
])
def test_hilbert_basis_examples(m, expected):
    hb = hilbert_basis(ResonanceProblem(m))
    assert sorted(hb.generators) == sorted(expected)
    assert sorted(hb.generators) == irreducible(solutions(m, 6))


def test_zero_entries_give_coordinates():
    hb = hilbert_basis((0, 1, -1))
    assert set(hb.generators) == {(1, 0, 0), (0, 1, 1)}


def test_degree_cap_reported():
    with pytest.raises(DegreeCapExceeded):
        hilbert_basis((7, -5), degree_cap=4)


def test_resonance_problem_needs_nonzero_entry():
    with pytest.raises(ValueError):
        ResonanceProblem((0, 0))


ms = st.lists(st.integers(-3, 3), min_size=1, max_size=4).filter(any)


@given(ms)
def test_hilbert_basis_generates_and_is_minimal(m):
    n = len(m)
    bound = 8 if n <= 3 else 6
    hb = hilbert_basis(m)
    for g in hb.generators:
        assert sum(x * y for x, y in zip(g, m)) == 0 and any(g)
    sols = set(solutions(m, bound))
    assert generated(hb.generators, bound, n) == sols
    for g in hb.generators:
        rest = [h for h in hb.generators if h != g]
        assert generated(rest, bound, n) != sols or sum(g) > bound


@given(ms)
def test_hilbert_basis_sorted_canonically(m):
    gens = hilbert_basis(m).generators
    keys = [(sum(a), tuple(-x for x in a)) for a in gens]
    assert keys == sorted(keys)


# ---------------------------------------------------------------- generators


def cls_of(case, m):
    return SpectrumClass(case, sum(1 for v in m if v == 0), m, 1.0)


def test_generators_hyperbolic():
    cls = cls_of(Case.STRONG_HYPERBOLIC, (1, -1))
    ig = invariant_generators(cls, hilbert_basis(cls.m))
    assert [q.terms for q in ig.real_forms] == [{(1, 1): 1}]


def test_generators_rotation_block():
    cls = cls_of(Case.STRONG_ELLIPTIC, (1, -1))
    ig = invariant_generators(cls, hilbert_basis(cls.m))
    assert [q.terms for q in ig.real_forms] == [{(2, 0): 1, (0, 2): 1}]


def test_generators_weak_hyperbolic():
    cls = cls_of(Case.WEAK_HYPERBOLIC, (0, 1, -1))
    ig = invariant_generators(cls, hilbert_basis(cls.m))
    assert sorted(q.terms.items() for q in ig.real_forms) == sorted(
        [{(1, 0, 0): 1}.items(), {(0, 1, 1): 1}.items()])


CLASSES = [
    (Case.STRONG_HYPERBOLIC, (1, -1)), (Case.STRONG_HYPERBOLIC, (2, -3)),
    (Case.STRONG_HYPERBOLIC, (2, 1, -1, -2)), (Case.WEAK_HYPERBOLIC, (0, 0, 1, -1)),
    (Case.STRONG_ELLIPTIC, (1, -1, 2, -2)), (Case.STRONG_ELLIPTIC, (2, -2, 3, -3)),
    (Case.WEAK_ELLIPTIC, (0, 1, -1)), (Case.STRONG_ELLIPTIC, (1, -1, 1, -1)),
]


@pytest.mark.parametrize("case, m", CLASSES)
def test_generators_annihilated_and_real(case, m):
    cls = cls_of(case, m)
    ig = invariant_generators(cls, hilbert_basis(m))
    lin = VectorFieldJet.from_matrix(canonical_matrix(m, case.elliptic), ig.order)
    for q in ig.real_forms:
        assert q.is_real()
        assert lie_derivative(lin, q).is_zero()
    assert ig.real_forms


# ---------------------------------------------------------------- express


def test_express_direct_match():
    cls = cls_of(Case.STRONG_HYPERBOLIC, (1, -1))
    ig = invariant_generators(cls, hilbert_basis(cls.m), order=4)
    f = TruncatedSeries(2, 4, {(0, 0): 1, (1, 1): 1, (2, 2): 1})
    assert express_in_invariants(f, ig).terms == {(0,): 1, (1,): 1, (2,): 1}


def test_express_radius_series():
    cls = cls_of(Case.STRONG_ELLIPTIC, (1, -1))
    ig = invariant_generators(cls, hilbert_basis(cls.m), order=6)
    u = TruncatedSeries(2, 6, {(2, 0): 1, (0, 2): 1})
    f = u + mul_truncated(mul_truncated(u, u), u)
    assert express_in_invariants(f, ig).terms == {(1,): 1, (3,): 1}


def test_express_rejects_non_invariant():
    cls = cls_of(Case.STRONG_HYPERBOLIC, (1, -1))
    ig = invariant_generators(cls, hilbert_basis(cls.m), order=3)
    with pytest.raises(NotInvariant):
        express_in_invariants(TruncatedSeries.variable(2, 3, 0), ig)


@given(st.sampled_from(CLASSES), st.lists(st.tuples(st.integers(-3, 3), st.integers(1, 3)), min_size=1,
                                          max_size=4), st.data())
def test_express_round_trip(cm, coeffs, data):
    case, m = cm
    order = 6
    cls = cls_of(case, m)
    ig = invariant_generators(cls, hilbert_basis(m), order=order)
    qs = [q.with_order(order) for q in ig.real_forms]
    n = len(m)
    f = TruncatedSeries.constant(n, order, 1)
    for p, q in coeffs:
        term = TruncatedSeries.constant(n, order, mpq(p, q))
        for _ in range(data.draw(st.integers(1, 2))):
            term = mul_truncated(term, data.draw(st.sampled_from(qs)))
        f = f + term
    fhat = express_in_invariants(f, ig)
    # fhat lives in weighted degree; widen it to the jet order before substituting
    back = compose_series(TruncatedSeries(fhat.nvars, order, fhat.terms), qs)
    assert back == f
