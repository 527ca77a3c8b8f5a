import pytest
import sympy as sp
from gmpy2 import mpq
from hypothesis import given
from hypothesis import strategies as st

from nfforge.series import (
    PolyMap,
    ShapeMismatch,
    SingularMap,
    TruncatedSeries,
    VectorFieldJet,
    compose_maps,
    compose_series,
    invert_map,
    jacobian_rank_series,
    lie_derivative,
    mul_truncated,
    pushforward,
)
from oracles import from_sympy, series_st, syms, to_sympy, truncate_sympy


def P(n, order, terms):
    return TruncatedSeries(n, order, terms)


def var(n, order, i):
    return TruncatedSeries.variable(n, order, i)


# ---------------------------------------------------------------- storage


def test_zero_coefficients_are_not_stored():
    s = P(2, 3, {(1, 0): 1, (0, 1): 0})
    assert s.terms == {(1, 0): 1}


def test_terms_above_order_are_dropped():
    s = P(2, 2, {(2, 1): 1, (1, 0): 1})
    assert s.terms == {(1, 0): 1}
    assert all(sum(e) <= s.order for e in s.terms)


def test_mismatched_shapes_never_combine():
    with pytest.raises(ShapeMismatch):
        P(2, 3, {(1, 0): 1}) + P(2, 4, {(1, 0): 1})
    with pytest.raises(ShapeMismatch):
        mul_truncated(P(2, 3, {}), P(3, 3, {}))


def test_vector_field_must_vanish_at_origin():
    with pytest.raises(ValueError):
        VectorFieldJet([P(2, 2, {(0, 0): 1}), P(2, 2, {})])


def test_linear_part_duplicates_degree_one_block():
    X = VectorFieldJet.from_matrix([[1, 2], [3, 4]], 3, [P(2, 3, {(2, 0): 5}), P(2, 3, {})])
    assert X.linear_part == [[1, 2], [3, 4]]


# ---------------------------------------------------------------- mul_truncated


def test_mul_telescoping():
    a = P(1, 2, {(0,): 1, (1,): 1})
    b = P(1, 2, {(0,): 1, (1,): -1})
    assert mul_truncated(a, b) == P(1, 2, {(0,): 1, (2,): -1})


def test_mul_truncation_rule():
    assert mul_truncated(var(2, 1, 0), var(2, 1, 1)).is_zero()


def test_mul_square_matches_expansion():
    a = P(1, 2, {(0,): 1, (1,): 1, (2,): 1})
    (x,) = syms(1)
    expected = from_sympy(truncate_sympy((1 + x + x ** 2) ** 2, [x], 2), 1, 2)
    assert mul_truncated(a, a) == expected == P(1, 2, {(0,): 1, (1,): 2, (2,): 3})


@given(series_st(), series_st())
def test_mul_commutes(a, b):
    assert mul_truncated(a, b) == mul_truncated(b, a)


@given(series_st(), series_st(), series_st())
def test_mul_associates(a, b, c):
    assert mul_truncated(mul_truncated(a, b), c) == mul_truncated(a, mul_truncated(b, c))


@given(series_st(n=3, order=4), series_st(n=3, order=4))
def test_mul_matches_sympy(a, b):
    xs = syms(3)
    expected = truncate_sympy(to_sympy(a, xs) * to_sympy(b, xs), xs, 4)
    assert to_sympy(mul_truncated(a, b), xs) == expected


# ---------------------------------------------------------------- compose


def test_compose_identity_substitution():
    f = var(1, 1, 0)
    phi = [P(2, 1, {(1, 0): 1, (0, 1): 1})]
    assert compose_series(f, phi) == P(2, 1, {(1, 0): 1, (0, 1): 1})


def test_compose_square():
    f = P(1, 3, {(2,): 1})
    phi = PolyMap([P(1, 3, {(1,): 1, (2,): 1})])
    assert compose_series(f, phi) == P(1, 3, {(2,): 1, (3,): 2})


def test_compose_rejects_constant_term():
    with pytest.raises(ValueError):
        compose_series(var(1, 2, 0), [P(1, 2, {(0,): 1, (1,): 1})])


@given(series_st(n=2, order=4))
def test_compose_with_identity(f):
    assert compose_series(f, PolyMap.identity(2, 4)) == f


@st.composite
def near_identity(draw, n=2, order=3):
    comps = []
    for i in range(n):
        lin = {tuple(1 if k == i else 0 for k in range(n)): 1}
        extra = draw(series_st(n=n, order=order, min_degree=2, max_terms=3))
        comps.append(P(n, order, lin) + extra)
    return PolyMap(comps)


@given(series_st(n=2, order=4), near_identity(order=4), near_identity(order=4))
def test_compose_respects_map_composition(f, phi, psi):
    lhs = compose_series(f, compose_maps(phi, psi))
    rhs = compose_series(compose_series(f, phi), psi)
    assert lhs == rhs


@given(series_st(n=2, order=4), near_identity(order=4))
def test_compose_matches_sympy(f, phi):
    xs = syms(2)
    sub = {x: to_sympy(c, xs) for x, c in zip(xs, phi)}
    expected = truncate_sympy(to_sympy(f, xs).subs(sub, simultaneous=True), xs, 4)
    assert to_sympy(compose_series(f, phi), xs) == expected


# ---------------------------------------------------------------- invert_map


def test_invert_identity():
    assert invert_map(PolyMap.identity(3, 4)) == PolyMap.identity(3, 4)


def test_invert_quadratic_shear():
    phi = PolyMap([P(2, 3, {(1, 0): 1, (0, 2): 1}), var(2, 3, 1)])
    psi = invert_map(phi)
    assert psi == PolyMap([P(2, 3, {(1, 0): 1, (0, 2): -1}), var(2, 3, 1)])
    assert compose_maps(phi, psi) == PolyMap.identity(2, 3)


def test_invert_linear():
    phi = PolyMap([P(2, 2, {(1, 0): 2}), P(2, 2, {(0, 1): 3})])
    assert invert_map(phi) == PolyMap([P(2, 2, {(1, 0): mpq(1, 2)}), P(2, 2, {(0, 1): mpq(1, 3)})])


def test_invert_singular_map():
    with pytest.raises(SingularMap):
        invert_map(PolyMap([P(2, 2, {(1, 0): 1}), P(2, 2, {(1, 0): 1})]))


@given(near_identity(n=3, order=4))
def test_invert_round_trip(phi):
    psi = invert_map(phi)
    ident = PolyMap.identity(3, 4)
    assert compose_maps(phi, psi) == ident
    assert compose_maps(psi, phi) == ident


# ---------------------------------------------------------------- pushforward


def hyperbolic(order):
    return VectorFieldJet.from_matrix([[1, 0], [0, -1]], order)


@given(st.integers(2, 5))
def test_pushforward_identity(order):
    X = VectorFieldJet.from_matrix([[1, 2], [0, -1]], order, [P(2, order, {(1, 1): 3}), P(2, order, {})])
    assert pushforward(X, PolyMap.identity(2, order)) == X


def test_pushforward_linear_scaling():
    X = VectorFieldJet([var(1, 3, 0)])
    phi = PolyMap([P(1, 3, {(1,): 2})])
    assert pushforward(X, phi) == X


def test_pushforward_shear_against_chain_rule():
    """Chain-rule oracle: for y = phi(x), y' = DPhi(x) X(x) rewritten in y."""
    X = hyperbolic(3)
    phi = PolyMap([P(2, 3, {(1, 0): 1, (0, 2): 1}), var(2, 3, 1)])
    got = pushforward(X, phi)
    x, y = sp.symbols("x y")
    u, v = sp.symbols("u v")
    fwd = sp.Matrix([x + y ** 2, y])
    vel = fwd.jacobian([x, y]) * sp.Matrix([x, -y])
    inverse = {x: u - v ** 2, y: v}
    expected = [truncate_sympy(sp.expand(c.subs(inverse, simultaneous=True)), [u, v], 3) for c in vel]
    assert [to_sympy(c, [u, v]) for c in got] == expected
    # the formula gives x d/dx - y d/dy - 3 y^2 d/dx
    assert got[0] == P(2, 3, {(1, 0): 1, (0, 2): -3})
    back = pushforward(got, invert_map(phi))
    assert back == X


@given(near_identity(order=4), near_identity(order=4))
def test_pushforward_functorial(phi, psi):
    X = VectorFieldJet.from_matrix([[1, 0], [0, -2]], 4, [P(2, 4, {(1, 1): 1}), P(2, 4, {(2, 0): -1})])
    assert pushforward(X, compose_maps(phi, psi)) == pushforward(pushforward(X, psi), phi)


# ---------------------------------------------------------------- lie_derivative


def test_lie_resonant_monomial():
    assert lie_derivative(hyperbolic(3), P(2, 3, {(1, 1): 1})).is_zero()


def test_lie_euler_scaling():
    X = VectorFieldJet.from_matrix([[1, 0], [0, 0]], 3)
    assert lie_derivative(X, P(2, 3, {(2, 0): 1})) == P(2, 3, {(2, 0): 2})


def test_lie_rotation_annihilates_radius():
    X = VectorFieldJet.from_matrix([[0, -1], [1, 0]], 4)
    assert lie_derivative(X, P(2, 4, {(2, 0): 1, (0, 2): 1})).is_zero()


@given(series_st(n=2, order=4), series_st(n=2, order=4))
def test_lie_leibniz(f, g):
    X = VectorFieldJet.from_matrix([[1, 1], [0, -1]], 4, [P(2, 4, {(0, 2): 2}), P(2, 4, {(1, 1): -1})])
    lhs = lie_derivative(X, mul_truncated(f, g))
    rhs = mul_truncated(f, lie_derivative(X, g)) + mul_truncated(g, lie_derivative(X, f))
    assert lhs.equal_through(rhs, 3)


# ---------------------------------------------------------------- jacobian rank


def test_rank_of_coordinates():
    r, minor = jacobian_rank_series([var(2, 3, 0), var(2, 3, 1)])
    assert r == 2 and minor.terms == {(0, 0): 1}


def test_rank_functional_dependence():
    r, _ = jacobian_rank_series([P(2, 6, {(1, 1): 1}), P(2, 6, {(2, 2): 1})])
    assert r == 1


def test_rank_witness_minor_matches_determinant():
    F = [P(2, 4, {(1, 1): 1}), P(2, 4, {(2, 1): 1})]
    r, minor = jacobian_rank_series(F)
    x, y = sp.symbols("x y")
    det = sp.Matrix([x * y, x ** 2 * y]).jacobian([x, y]).det()
    assert r == 2
    assert to_sympy(minor, [x, y]) == sp.expand(det) == -x ** 2 * y


@given(series_st(n=3, order=3, min_degree=1))
def test_rank_bounded_by_dimension(extra):
    coords = [var(3, 3, i) for i in range(3)]
    assert jacobian_rank_series(coords)[0] == 3
    assert jacobian_rank_series(coords + [extra])[0] <= 3
