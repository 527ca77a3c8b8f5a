"""Hypothesis checks for completely integrable fields and the weak-case reduction.

An integrable system is a vector field jet together with ``n - 1`` first
integrals.  This module checks that the integrals really are integrals,
that they are independent (also after passing to lowest-degree parts), that
the linear part is of one of the four admissible kinds, and, when zero
eigenvalues are present, that ``k`` integrals have independent
differentials at the origin.  Weak cases can then be reduced to a family of
``(n - k)``-dimensional fields parametrized by the values of those
integrals.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .exact import ONE, ZERO, is_real, mat_inv, nullspace, rank
from .series import (
    PolyMap,
    SingularMap,
    TruncatedSeries,
    VectorFieldJet,
    compose_many,
    compose_series,
    jacobian_rank_series,
    lie_derivative,
    mul_truncated,
    pushforward,
)
from .spectrum import SpectrumClass, SpectrumError, classify_matrix, semisimplicity_check

__all__ = [
    "IntegrableSystem",
    "IntegrabilityWarning",
    "NondegeneracyReport",
    "ParametrizedFamily",
    "SingularLocus",
    "NotIndependent",
    "StraighteningFailed",
    "ImplicitSolveFailed",
    "check_integrability",
    "adapt_integrals",
    "check_nondegeneracy",
    "reduce_zero_block",
    "singular_locus_2d",
]


class IntegrabilityWarning(UserWarning):
    pass


class NotIndependent(ValueError):
    pass


class StraighteningFailed(ValueError):
    pass


class ImplicitSolveFailed(ValueError):
    pass


def check_integrability(X: VectorFieldJet, Fs):
    """``(True, None)`` if every ``X(F_i)`` vanishes, else ``(False, lowest bad degree)``.

    ``X(F)`` is exact through the full order because ``X`` vanishes at the
    origin, so the whole jet is checked.
    """
    worst = None
    for f in Fs:
        low = lie_derivative(X, f).lowest_degree()
        if low is not None and (worst is None or low < worst):
            worst = low
    return worst is None, worst


@dataclass(frozen=True)
class IntegrableSystem:
    X: VectorFieldJet
    first_integrals: tuple
    order: int | None = None
    cls: SpectrumClass | None = None
    integrable: bool = field(default=True, init=False)
    violation_degree: int | None = field(default=None, init=False)

    def __post_init__(self):
        Fs = tuple(self.first_integrals)
        order = self.X.order if self.order is None else self.order
        if order != self.X.order:
            raise ValueError(f"order {order} differs from the jet order {self.X.order}")
        for f in Fs:
            self.X[0]._check(f)
        object.__setattr__(self, "first_integrals", Fs)
        object.__setattr__(self, "order", order)
        ok, bad = check_integrability(self.X, Fs)
        object.__setattr__(self, "integrable", ok)
        object.__setattr__(self, "violation_degree", bad)
        if not ok:
            warnings.warn(f"X(F) != 0 starting at degree {bad}", IntegrabilityWarning, stacklevel=3)

    @property
    def n(self):
        return self.X.nvars


# ---------------------------------------------------------- adapted integrals


def _lowest_part(f: TruncatedSeries):
    d = f.lowest_degree()
    return d, f.homogeneous(d)


def _wide(f: TruncatedSeries, order):
    return TruncatedSeries(f.nvars, order, f.terms)


def _lowest_parts_independent(Fs):
    """Exact check that the lowest-degree parts have a nonzero Jacobian minor."""
    parts = [_lowest_part(f) for f in Fs]
    width = sum(d for d, _ in parts) + 1
    hs = [_wide(h, width) for _, h in parts]
    r, _ = jacobian_rank_series(hs)
    return r == len(Fs)


def _weighted_exponents(weights, degree):
    out = []

    def rec(i, remaining, prefix):
        if i == len(weights):
            if remaining == 0:
                out.append(tuple(prefix))
            return
        for e in range(remaining // weights[i], -1, -1):
            rec(i + 1, remaining - e * weights[i], prefix + [e])

    rec(0, degree, [])
    return out


def _find_relation(hs, weights, bound):
    """Lowest weighted degree polynomial relation among homogeneous ``hs``."""
    n = hs[0].nvars
    order = bound
    hs = [_wide(h, order) for h in hs]
    cache = {(0,) * len(hs): TruncatedSeries.constant(n, order, 1)}

    def power(beta):
        hit = cache.get(beta)
        if hit is None:
            j = max(i for i, e in enumerate(beta) if e)
            prev = list(beta)
            prev[j] -= 1
            hit = mul_truncated(power(tuple(prev)), hs[j])
            cache[beta] = hit
        return hit

    for D in range(min(weights), bound + 1):
        betas = _weighted_exponents(weights, D)
        if len(betas) < 2:
            continue
        cols = [power(b) for b in betas]
        rows_idx = sorted({e for c in cols for e in c.terms})
        A = [[c.coeff(e) for c in cols] for e in rows_idx]
        kern = nullspace(A, len(betas))
        if kern:
            return D, betas, kern[0]
    return None


def adapt_integrals(Fs, N: int | None = None, *, degree_bound: int | None = None, max_steps: int = 64):
    """Replace integrals by polynomial combinations with independent lowest parts.

    Constants are removed first.  While the lowest-degree parts are
    dependent, the lowest weighted-degree relation ``P(H) = 0`` is found by
    exact linear algebra, and one integral ``F_j`` with ``dP/du_j != 0`` is
    replaced by ``P(F)``, whose lowest degree is strictly larger.  Raises
    :class:`NotIndependent` when the integrals are dependent as jets or no
    relation shows up below ``degree_bound`` (default ``2 N``).
    """
    Fs = [f - f.constant_term for f in Fs]
    if not Fs:
        return []
    order = Fs[0].order if N is None else N
    if N is not None:
        Fs = [f.with_order(N) for f in Fs]
    bound = 2 * order if degree_bound is None else degree_bound
    r, _ = jacobian_rank_series(Fs)
    if r < len(Fs):
        raise NotIndependent(f"integrals have Jacobian rank {r} < {len(Fs)} within order {order}")
    for _ in range(max_steps):
        if any(f.is_zero() for f in Fs):
            raise NotIndependent("an integral vanished within the truncation order")
        if _lowest_parts_independent(Fs):
            return Fs
        parts = [_lowest_part(f) for f in Fs]
        weights = [d for d, _ in parts]
        found = _find_relation([h for _, h in parts], weights, bound)
        if found is None:
            raise NotIndependent(f"no relation among lowest parts up to weighted degree {bound}")
        D, betas, vec = found
        if D > order:
            raise NotIndependent(f"relation at weighted degree {D} exceeds the order {order}")
        P = TruncatedSeries(len(Fs), D, {b: c for b, c in zip(betas, vec) if c})
        replaced = False
        for j in reversed(range(len(Fs))):
            if P.derivative(j).is_zero():
                continue
            new_f = compose_series(P, Fs)
            trial = Fs[:j] + [new_f] + Fs[j + 1:]
            if not new_f.is_zero() and jacobian_rank_series(trial)[0] == len(Fs):
                Fs = trial
                replaced = True
                break
        if not replaced:
            raise NotIndependent("elimination step lost independence within the truncation order")
    raise NotIndependent(f"no adapted integrals after {max_steps} elimination steps")


# ------------------------------------------------------------ nondegeneracy


@dataclass(frozen=True)
class NondegeneracyReport:
    cond_i: bool
    witness_minor: TruncatedSeries | None
    cond_ii: bool
    cond_iii: bool
    rank_at_origin: int
    subset: tuple | None
    case: SpectrumClass | None
    semisimple: bool
    integrable: bool
    messages: tuple = ()

    @property
    def ok(self):
        return self.cond_i and self.cond_ii and self.cond_iii and self.integrable

    def to_dict(self):
        return {
            "cond_i": self.cond_i,
            "cond_ii": self.cond_ii,
            "cond_iii": self.cond_iii,
            "integrable": self.integrable,
            "semisimple": self.semisimple,
            "rank_at_origin": self.rank_at_origin,
            "subset": list(self.subset) if self.subset is not None else None,
            "case": self.case.to_dict() if self.case is not None else None,
            "messages": list(self.messages),
        }


def _gradient_at_origin(f: TruncatedSeries):
    n = f.nvars
    return [f.coeff(tuple(1 if k == j else 0 for k in range(n))) for j in range(n)]


def independent_subset(Fs, k):
    """Lexicographically first ``k``-subset of integrals with independent differentials at O."""
    grads = [_gradient_at_origin(f) for f in Fs]
    best = 0
    for sub in combinations(range(len(Fs)), k):
        r = rank([grads[i] for i in sub]) if k else 0
        best = max(best, r)
        if r == k:
            return sub, r
    return None, best


def check_nondegeneracy(sys: IntegrableSystem) -> NondegeneracyReport:
    msgs = []
    n = sys.n
    Fs = list(sys.first_integrals)
    cond_i, minor = False, None
    if len(Fs) != n - 1:
        msgs.append(f"expected {n - 1} first integrals, got {len(Fs)}")
    elif Fs:
        r, minor = jacobian_rank_series(Fs)
        cond_i = r == n - 1
        if not cond_i:
            msgs.append(f"dF_1 ^ ... ^ dF_(n-1) vanishes within order {sys.order} (rank {r})")
            minor = None
    else:
        cond_i = True
    A = sys.X.linear_part
    semisimple = all(is_real(v) for row in A for v in row) and semisimplicity_check(A)
    cls = sys.cls
    if not semisimple:
        msgs.append("linear part is not semisimple")
    if cls is None and semisimple:
        try:
            cls = classify_matrix(A)
        except SpectrumError as exc:
            msgs.append(f"spectrum: {type(exc).__name__}: {exc}")
    jets_ok = True
    if cond_i and Fs:
        try:
            adapt_integrals(Fs)
        except NotIndependent as exc:
            jets_ok = False
            msgs.append(f"adapted integrals: {exc}")
    cond_ii = semisimple and cls is not None and jets_ok
    cond_iii, subset, r0 = True, None, 0
    if cls is not None and cls.k:
        subset, r0 = independent_subset(Fs, cls.k)
        cond_iii = subset is not None
        if not cond_iii:
            msgs.append(f"no {cls.k} integrals have independent differentials at O (best rank {r0})")
    if not sys.integrable:
        msgs.append(f"X(F) != 0 at degree {sys.violation_degree}")
    return NondegeneracyReport(cond_i, minor, cond_ii, cond_iii, r0, subset, cls, semisimple,
                               sys.integrable, tuple(msgs))


# ------------------------------------------------------------ weak reduction


def _series_arrays(s: TruncatedSeries):
    exps, coeffs = s.to_arrays()
    return np.asarray(exps, dtype=float).reshape(-1, s.nvars), np.asarray(coeffs)


@dataclass(frozen=True)
class ParametrizedFamily:
    """Family of ``(n - k)``-dimensional fields indexed by the integral values ``c``.

    ``field`` is the straightened and re-centred jet in variables
    ``(c_1..c_k, w_1..w_{n-k})``; ``at_zero`` its restriction to ``c = 0``;
    ``first_order[i]`` the ``d/dc_i`` derivative at ``c = 0`` (reliable
    through order ``N - 1``); ``center`` the jets of ``O_c`` in the
    straightened coordinates.
    """

    k: int
    reduced_dim: int
    subset: tuple
    straightening: PolyMap
    straightened: VectorFieldJet
    center: tuple
    field: tuple
    at_zero: VectorFieldJet
    first_order: tuple

    def evaluator(self, c):
        """Float evaluator ``w -> Z(c, w)`` of the member at parameter value ``c``."""
        c = np.asarray(c, dtype=float).reshape(self.k)
        arrays = [_series_arrays(s) for s in self.field]

        def f(w):
            pt = np.concatenate([c, np.asarray(w, dtype=float)])
            out = np.empty(self.reduced_dim)
            for i, (E, a) in enumerate(arrays):
                out[i] = np.real(np.sum(a * np.prod(pt ** E, axis=1))) if len(a) else 0.0
            return out

        return f


def _restrict(s: TruncatedSeries, k, c_exp):
    """Terms of ``s`` whose first ``k`` exponents equal ``c_exp``, as a series in the rest."""
    n = s.nvars
    return TruncatedSeries(n - k, s.order, {e[k:]: v for e, v in s.items() if e[:k] == tuple(c_exp)})


def reduce_zero_block(sys: IntegrableSystem, cls: SpectrumClass | None = None) -> ParametrizedFamily:
    """Reduce a weak case to a family of fields on the level sets of ``k`` integrals."""
    if cls is None:
        cls = classify_matrix(sys.X.linear_part)
    k, n, order = cls.k, sys.n, sys.order
    if k == 0:
        raise StraighteningFailed("no zero eigenvalues: nothing to reduce")
    subset, _ = independent_subset(sys.first_integrals, k)
    if subset is None:
        raise StraighteningFailed(f"no {k} integrals with independent differentials at O")
    Fk = [sys.first_integrals[i] - sys.first_integrals[i].constant_term for i in subset]
    grads = [_gradient_at_origin(f) for f in Fk]
    chosen = []
    for j in range(n):
        unit = [ONE if t == j else ZERO for t in range(n)]
        if rank(grads + [[ONE if t == c else ZERO for t in range(n)] for c in chosen] + [unit]) == k + len(chosen) + 1:
            chosen.append(j)
        if len(chosen) == n - k:
            break
    theta = PolyMap(Fk + [TruncatedSeries.variable(n, order, j) for j in chosen])
    try:
        Xs = pushforward(sys.X, theta)
    except SingularMap as exc:
        raise StraighteningFailed(str(exc)) from None
    for i in range(k):
        if not Xs[i].is_zero():
            raise StraighteningFailed("straightened integrals are not annihilated (X(F) != 0)")
    L = Xs.linear_part
    Avv = [row[k:] for row in L[k:]]
    try:
        Ainv = mat_inv(Avv)
    except ZeroDivisionError:
        raise StraighteningFailed("zero eigenvalue outside the straightened block") from None
    # O_c: solve Xs_v(c, v(c)) = 0 degree by degree
    cvars = [TruncatedSeries.variable(k, order, i) for i in range(k)]
    v = [TruncatedSeries.zero(k, order) for _ in range(n - k)]
    comps_v = list(Xs.components[k:])
    for _ in range(order):
        G = compose_many(comps_v, cvars + v)
        v = [v[i] - sum((G[j].scale(Ainv[i][j]) for j in range(n - k) if Ainv[i][j]),
                        TruncatedSeries.zero(k, order)) for i in range(n - k)]
    G = compose_many(comps_v, cvars + v)
    if any(not g.is_zero() for g in G):
        raise StraighteningFailed("implicit solve for O_c did not converge within the order")
    # recentre: Z(c, w) = Xs_v(c, v(c) + w)
    lift = [TruncatedSeries.variable(n, order, i) for i in range(k)]
    lift += [compose_series(v[i], lift[:k]) + TruncatedSeries.variable(n, order, k + i)
             for i in range(n - k)]
    Z = tuple(compose_many(comps_v, lift))
    at_zero = VectorFieldJet([_restrict(z, k, (0,) * k) for z in Z])
    first = []
    for i in range(k):
        e = tuple(1 if t == i else 0 for t in range(k))
        first.append(VectorFieldJet([_restrict(z, k, e) for z in Z]))
    return ParametrizedFamily(k, n - k, tuple(subset), theta, Xs, tuple(v), Z, at_zero, tuple(first))


# ------------------------------------------------------------ 2D singular locus


@dataclass(frozen=True)
class SingularLocus:
    curve: TruncatedSeries
    second_on_curve: TruncatedSeries
    smooth: bool
    s_equals_s1: bool
    evidence: str = "jet-level evidence"

    def to_dict(self):
        return {
            "curve": [[list(e), str(c)] for e, c in self.curve.items()],
            "smooth": self.smooth,
            "s_equals_s1": self.s_equals_s1,
            "second_component_on_curve_lowest_degree": self.second_on_curve.lowest_degree(),
            "evidence": self.evidence,
        }


def singular_locus_2d(X: VectorFieldJet) -> SingularLocus:
    """Jet of ``S_1 = {X_x = 0}`` as a graph ``x = g(y)`` and whether ``X_y`` vanishes on it."""
    if X.nvars != 2:
        raise ValueError("singular_locus_2d needs a planar field")
    order = X.order
    a = X[0].coeff((1, 0))
    if a == 0:
        raise ImplicitSolveFailed("dX_x/dx vanishes at O")
    y = TruncatedSeries.variable(1, order, 0)
    g = TruncatedSeries.zero(1, order)
    inv = ONE / a
    for _ in range(order + 1):
        g = g - compose_series(X[0], [g, y]).scale(inv)
    if not compose_series(X[0], [g, y]).is_zero():
        raise ImplicitSolveFailed("implicit solve did not close within the order")
    second = compose_series(X[1], [g, y])
    return SingularLocus(g, second, True, second.is_zero())
