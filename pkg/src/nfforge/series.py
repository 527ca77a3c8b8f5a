"""Truncated multivariate power series with exact coefficients.

A series over ``nvars`` variables cut at total degree ``order`` stores its
terms bucketed by degree.  Inside a bucket exponents are packed into a
single integer in base ``order + 1``; as long as the sum of two degrees does
not exceed ``order`` no digit overflows, so exponent addition is integer
addition.  Public accessors always speak exponent tuples.

Every object here is immutable after construction and every operation is a
pure function returning a fresh value.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import combinations
from math import factorial

import numpy as np
from gmpy2 import mpq

from .exact import QI, ZERO, ONE, is_real, mat_inv, real_part, to_scalar

__all__ = [
    "TruncatedSeries",
    "VectorFieldJet",
    "PolyMap",
    "ShapeMismatch",
    "SingularMap",
    "mul_truncated",
    "compose_series",
    "compose_maps",
    "invert_map",
    "pushforward",
    "lie_derivative",
    "lie_bracket",
    "flow_pushforward",
    "flow_pullback",
    "jacobian_rank_series",
    "series_det",
    "monomials",
]


class ShapeMismatch(ValueError):
    """Series over different variable counts or truncation orders were mixed."""


class SingularMap(ValueError):
    """A map whose linear part is not invertible was used where it must be."""


@lru_cache(maxsize=None)
def _layout(nvars: int, order: int):
    base = order + 1
    powers = tuple(base ** j for j in range(nvars))
    return base, powers


@lru_cache(maxsize=65536)
def _unpack(key: int, nvars: int, base: int) -> tuple:
    out = []
    for _ in range(nvars):
        key, r = divmod(key, base)
        out.append(r)
    return tuple(out)


def _pack(exp, powers) -> int:
    return sum(e * p for e, p in zip(exp, powers))


@lru_cache(maxsize=None)
def monomials(nvars: int, degree: int) -> tuple:
    """All exponent tuples of the given total degree, in descending lex order."""
    if nvars == 0:
        return ((),) if degree == 0 else ()
    if nvars == 1:
        return ((degree,),)
    out = []
    for first in range(degree, -1, -1):
        for rest in monomials(nvars - 1, degree - first):
            out.append((first,) + rest)
    return tuple(out)


def _clean(buckets):
    return tuple({k: v for k, v in b.items() if v} for b in buckets)


class TruncatedSeries:
    """Formal power series in ``nvars`` variables modulo degree ``order + 1``."""

    __slots__ = ("nvars", "order", "_b")

    def __init__(self, nvars: int, order: int, terms=None):
        if nvars < 0 or order < 0:
            raise ValueError("nvars and order must be nonnegative")
        self.nvars = nvars
        self.order = order
        _, powers = _layout(nvars, order)
        buckets = [dict() for _ in range(order + 1)]
        for exp, c in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars:
                raise ShapeMismatch(f"exponent {exp} does not have {nvars} entries")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent {exp}")
            d = sum(exp)
            if d > order:
                continue
            c = to_scalar(c)
            if c:
                k = _pack(exp, powers)
                prev = buckets[d].get(k)
                buckets[d][k] = c if prev is None else prev + c
        self._b = _clean(buckets)

    @classmethod
    def _from_buckets(cls, nvars, order, buckets):
        obj = cls.__new__(cls)
        obj.nvars = nvars
        obj.order = order
        obj._b = _clean(buckets)
        return obj

    @classmethod
    def zero(cls, nvars, order):
        return cls(nvars, order)

    @classmethod
    def constant(cls, nvars, order, value):
        return cls(nvars, order, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars, order, index, coeff=1):
        exp = [0] * nvars
        exp[index] = 1
        return cls(nvars, order, {tuple(exp): coeff})

    # ------------------------------------------------------------ access

    def _check(self, other):
        if not isinstance(other, TruncatedSeries):
            raise TypeError(f"expected TruncatedSeries, got {type(other).__name__}")
        if other.nvars != self.nvars or other.order != self.order:
            raise ShapeMismatch(
                f"cannot combine series ({self.nvars} vars, order {self.order}) "
                f"with ({other.nvars} vars, order {other.order})")

    def items(self):
        """``(exponent, coeff)`` pairs in canonical order: by degree, then descending lex."""
        base, _ = _layout(self.nvars, self.order)
        out = []
        for d, bucket in enumerate(self._b):
            part = [(_unpack(k, self.nvars, base), c) for k, c in bucket.items()]
            part.sort(key=lambda t: t[0], reverse=True)
            out.extend(part)
        return out

    @property
    def terms(self) -> dict:
        return dict(self.items())

    def coeff(self, exp):
        exp = tuple(exp)
        d = sum(exp)
        if d > self.order:
            return ZERO
        _, powers = _layout(self.nvars, self.order)
        return self._b[d].get(_pack(exp, powers), ZERO)

    def __len__(self):
        return sum(len(b) for b in self._b)

    def is_zero(self) -> bool:
        return not any(self._b)

    def lowest_degree(self):
        for d, b in enumerate(self._b):
            if b:
                return d
        return None

    def max_degree(self):
        for d in range(self.order, -1, -1):
            if self._b[d]:
                return d
        return None

    @property
    def constant_term(self):
        return self._b[0].get(0, ZERO)

    def homogeneous(self, degree):
        buckets = [dict() for _ in range(self.order + 1)]
        if 0 <= degree <= self.order:
            buckets[degree] = dict(self._b[degree])
        return TruncatedSeries._from_buckets(self.nvars, self.order, buckets)

    def truncate(self, degree):
        """Drop terms above ``degree`` (the order is kept)."""
        buckets = [dict(b) if d <= degree else {} for d, b in enumerate(self._b)]
        return TruncatedSeries._from_buckets(self.nvars, self.order, buckets)

    def drop_below(self, degree):
        buckets = [dict(b) if d >= degree else {} for d, b in enumerate(self._b)]
        return TruncatedSeries._from_buckets(self.nvars, self.order, buckets)

    def with_order(self, order):
        """Re-express at another truncation order (terms above it are dropped)."""
        return TruncatedSeries(self.nvars, order, {e: c for e, c in self.items() if sum(e) <= order})

    def is_real(self) -> bool:
        return all(is_real(c) for b in self._b for c in b.values())

    def real(self):
        """Real part of every coefficient, as ``mpq``."""
        return self.map_coeffs(real_part)

    def map_coeffs(self, fn):
        return TruncatedSeries._from_buckets(
            self.nvars, self.order, [{k: fn(c) for k, c in b.items()} for b in self._b])

    # -------------------------------------------------------- arithmetic

    def __add__(self, other):
        if not isinstance(other, TruncatedSeries):
            return self + TruncatedSeries.constant(self.nvars, self.order, other)
        self._check(other)
        buckets = []
        for a, b in zip(self._b, other._b):
            out = dict(a)
            for k, c in b.items():
                v = out.get(k)
                out[k] = c if v is None else v + c
            buckets.append(out)
        return TruncatedSeries._from_buckets(self.nvars, self.order, buckets)

    __radd__ = __add__

    def __neg__(self):
        return self.map_coeffs(lambda c: -c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c):
        c = to_scalar(c) if not isinstance(c, QI) else c
        if not c:
            return TruncatedSeries.zero(self.nvars, self.order)
        return self.map_coeffs(lambda v: v * c)

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            return mul_truncated(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        result = TruncatedSeries.constant(self.nvars, self.order, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def derivative(self, j: int):
        """``d/dx_j``; the result is exact through degree ``order - 1``."""
        base, powers = _layout(self.nvars, self.order)
        p = powers[j]
        buckets = [dict() for _ in range(self.order + 1)]
        for d in range(1, self.order + 1):
            out = buckets[d - 1]
            for k, c in self._b[d].items():
                e = (k // p) % base
                if e:
                    out[k - p] = c * e
        return TruncatedSeries._from_buckets(self.nvars, self.order, buckets)

    def gradient(self):
        return [self.derivative(j) for j in range(self.nvars)]

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            if self.max_degree() in (None, 0):
                return self.constant_term == to_scalar(other)
            return False
        return (self.nvars, self.order) == (other.nvars, other.order) and self._b == other._b

    def __hash__(self):
        return hash((self.nvars, self.order, tuple(self.items())))

    def equal_through(self, other, degree) -> bool:
        self._check(other)
        return all(self._b[d] == other._b[d] for d in range(min(degree, self.order) + 1))

    # -------------------------------------------------------- evaluation

    def evaluate(self, point):
        """Exact evaluation at a point with exact (or exactly convertible) coordinates."""
        pt = [to_scalar(v) if not isinstance(v, QI) else v for v in point]
        total = ZERO
        for exp, c in self.items():
            term = c
            for x, e in zip(pt, exp):
                if e:
                    term = term * x ** e
            total = total + term
        return total

    def to_arrays(self):
        """Exponent matrix and float coefficient vector in canonical term order."""
        items = self.items()
        exps = np.array([e for e, _ in items], dtype=np.int64).reshape(len(items), self.nvars)
        if all(is_real(c) for _, c in items):
            coeffs = np.array([float(real_part(c)) for _, c in items], dtype=float)
        else:
            coeffs = np.array([complex(c) if isinstance(c, QI) else float(c) for _, c in items])
        return exps, coeffs

    def __repr__(self):
        return f"TruncatedSeries({self.nvars}, {self.order}, {self.terms!r})"

    def __str__(self):
        if self.is_zero():
            return "0"
        parts = []
        for exp, c in self.items():
            mono = "*".join(f"x{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(exp) if e)
            parts.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)


def mul_truncated(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Product of two series, discarding every term above the common order."""
    a._check(b)
    n, order = a.nvars, a.order
    buckets = [dict() for _ in range(order + 1)]
    for da, ta in enumerate(a._b):
        if not ta:
            continue
        for db in range(order - da + 1):
            tb = b._b[db]
            if not tb:
                continue
            out = buckets[da + db]
            get = out.get
            for ka, ca in ta.items():
                for kb, cb in tb.items():
                    k = ka + kb
                    v = get(k)
                    out[k] = ca * cb if v is None else v + ca * cb
    return TruncatedSeries._from_buckets(n, order, buckets)


def _accumulate(buckets, series, c):
    for d, b in enumerate(series._b):
        out = buckets[d]
        for k, v in b.items():
            prev = out.get(k)
            out[k] = v * c if prev is None else prev + v * c


def _power_table(maps, exps):
    """Products ``maps^alpha`` for every alpha in ``exps`` (shared prefixes memoised)."""
    ref = maps[0]
    memo = {(0,) * len(maps): TruncatedSeries.constant(ref.nvars, ref.order, 1)}

    def get(alpha):
        hit = memo.get(alpha)
        if hit is not None:
            return hit
        j = max(i for i, e in enumerate(alpha) if e)
        prev = list(alpha)
        prev[j] -= 1
        val = mul_truncated(get(tuple(prev)), maps[j])
        memo[alpha] = val
        return val

    for alpha in sorted(exps, key=lambda e: (sum(e), e)):
        get(alpha)
    return memo


def _check_substitution(nvars_f, maps):
    if len(maps) != nvars_f:
        raise ShapeMismatch(f"need {nvars_f} substituted components, got {len(maps)}")
    if not maps:
        raise ShapeMismatch("empty substitution")
    ref = maps[0]
    for m in maps:
        ref._check(m)
        if m.constant_term != 0:
            raise ValueError("substituted components must vanish at the origin")


def compose_many(fs, maps):
    """Substitute ``maps`` into every series of ``fs`` sharing one power table."""
    maps = list(maps.components) if isinstance(maps, PolyMap) else list(maps)
    _check_substitution(fs[0].nvars, maps)
    ref = maps[0]
    needed = set()
    for f in fs:
        if f.nvars != fs[0].nvars:
            raise ShapeMismatch("all substituted series must share nvars")
        for exp, _ in f.items():
            if sum(exp) <= ref.order:
                needed.add(exp)
    table = _power_table(maps, needed)
    out = []
    for f in fs:
        buckets = [dict() for _ in range(ref.order + 1)]
        for exp, c in f.items():
            if sum(exp) <= ref.order:
                _accumulate(buckets, table[exp], c)
        out.append(TruncatedSeries._from_buckets(ref.nvars, ref.order, buckets))
    return out


def compose_series(f: TruncatedSeries, phi) -> TruncatedSeries:
    """``f`` with its variables replaced by the components of ``phi``.

    ``phi`` may be a :class:`PolyMap` or any sequence of series without
    constant term; the result has their common variable count and order.
    """
    return compose_many([f], phi)[0]


class VectorFieldJet:
    """Jet of a vector field vanishing at the origin."""

    __slots__ = ("components", "linear_part")

    def __init__(self, components, linear_part=None):
        comps = tuple(components)
        if not comps:
            raise ShapeMismatch("a vector field needs at least one component")
        n = comps[0].nvars
        if len(comps) != n:
            raise ShapeMismatch(f"{len(comps)} components for {n} variables")
        for c in comps:
            comps[0]._check(c)
            if c.constant_term != 0:
                raise ValueError("vector field jet must vanish at the origin")
        lin = _linear_matrix(comps)
        if linear_part is not None:
            given = [[to_scalar(v) if not isinstance(v, QI) else v for v in row] for row in linear_part]
            if given != lin:
                raise ValueError("linear_part disagrees with degree-1 coefficients")
        self.components = comps
        self.linear_part = lin

    @classmethod
    def from_matrix(cls, matrix, order, higher=None):
        n = len(matrix)
        comps = []
        for i in range(n):
            terms = {}
            for j in range(n):
                e = [0] * n
                e[j] = 1
                terms[tuple(e)] = matrix[i][j]
            s = TruncatedSeries(n, order, terms)
            if higher is not None:
                extra = higher[i]
                if extra.lowest_degree() is not None and extra.lowest_degree() < 2:
                    raise ValueError("higher-order part must start at degree 2")
                s = s + extra
            comps.append(s)
        return cls(comps)

    @classmethod
    def zero(cls, nvars, order):
        return cls([TruncatedSeries.zero(nvars, order)] * nvars)

    @property
    def nvars(self):
        return self.components[0].nvars

    @property
    def order(self):
        return self.components[0].order

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def __add__(self, other):
        return VectorFieldJet([a + b for a, b in zip(self, other)])

    def __sub__(self, other):
        return VectorFieldJet([a - b for a, b in zip(self, other)])

    def __neg__(self):
        return VectorFieldJet([-a for a in self])

    def scale(self, c):
        return VectorFieldJet([a.scale(c) for a in self])

    def times(self, f: TruncatedSeries):
        """Pointwise product ``f * X``."""
        return VectorFieldJet([mul_truncated(f, a) for a in self])

    def homogeneous(self, degree):
        return VectorFieldJet([a.homogeneous(degree) for a in self])

    def truncate(self, degree):
        return VectorFieldJet([a.truncate(degree) for a in self])

    def linear_field(self):
        return self.truncate(1)

    def is_zero(self):
        return all(a.is_zero() for a in self)

    def lowest_degree(self):
        degs = [a.lowest_degree() for a in self if not a.is_zero()]
        return min(degs) if degs else None

    def is_real(self):
        return all(a.is_real() for a in self)

    def real(self):
        return VectorFieldJet([a.real() for a in self])

    def map_coeffs(self, fn):
        return VectorFieldJet([a.map_coeffs(fn) for a in self])

    def with_order(self, order):
        return VectorFieldJet([a.with_order(order) for a in self])

    def __eq__(self, other):
        return isinstance(other, VectorFieldJet) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return f"VectorFieldJet({list(self.components)!r})"


def _linear_matrix(comps):
    n = comps[0].nvars
    rows = []
    for c in comps:
        row = []
        for j in range(n):
            e = [0] * n
            e[j] = 1
            row.append(c.coeff(e))
        rows.append(row)
    return rows


class PolyMap:
    """Polynomial map fixing the origin (a coordinate change when invertible)."""

    __slots__ = ("components",)

    def __init__(self, components):
        comps = tuple(components)
        if not comps:
            raise ShapeMismatch("a map needs at least one component")
        for c in comps:
            comps[0]._check(c)
            if c.constant_term != 0:
                raise ValueError("map components must vanish at the origin")
        self.components = comps

    @classmethod
    def identity(cls, nvars, order):
        return cls([TruncatedSeries.variable(nvars, order, i) for i in range(nvars)])

    @classmethod
    def from_matrix(cls, matrix, order):
        n = len(matrix[0])
        comps = []
        for row in matrix:
            terms = {}
            for j, v in enumerate(row):
                e = [0] * n
                e[j] = 1
                terms[tuple(e)] = v
            comps.append(TruncatedSeries(n, order, terms))
        return cls(comps)

    @property
    def nvars(self):
        return self.components[0].nvars

    @property
    def order(self):
        return self.components[0].order

    @property
    def linear_part(self):
        return _linear_matrix(self.components) if len(self.components) == self.nvars else [
            [c.coeff(tuple(1 if k == j else 0 for k in range(self.nvars))) for j in range(self.nvars)]
            for c in self.components]

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    def jacobian(self):
        return [[c.derivative(j) for j in range(self.nvars)] for c in self.components]

    def compose(self, inner: "PolyMap") -> "PolyMap":
        """``self o inner``."""
        return compose_maps(self, inner)

    def is_real(self):
        return all(c.is_real() for c in self)

    def real(self):
        return PolyMap([c.real() for c in self])

    def map_coeffs(self, fn):
        return PolyMap([c.map_coeffs(fn) for c in self])

    def __eq__(self, other):
        return isinstance(other, PolyMap) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return f"PolyMap({list(self.components)!r})"


def compose_maps(outer: PolyMap, inner: PolyMap) -> PolyMap:
    return PolyMap(compose_many(list(outer.components), inner))


def _apply_matrix(matrix, comps):
    nvars, order = comps[0].nvars, comps[0].order
    out = []
    for row in matrix:
        buckets = [dict() for _ in range(order + 1)]
        for a, c in zip(row, comps):
            if a:
                _accumulate(buckets, c, a)
        out.append(TruncatedSeries._from_buckets(nvars, order, buckets))
    return out


def _bucket_product(a_b, b_b, degree, a_low, b_low):
    """Degree-``degree`` part of a product given bucket lists (online use)."""
    out = {}
    get = out.get
    for da in range(a_low, degree - b_low + 1):
        ta = a_b[da]
        if not ta:
            continue
        tb = b_b[degree - da]
        if not tb:
            continue
        for ka, ca in ta.items():
            for kb, cb in tb.items():
                k = ka + kb
                v = get(k)
                out[k] = ca * cb if v is None else v + ca * cb
    return out


def invert_map(phi: PolyMap) -> PolyMap:
    """Compositional inverse through the truncation order.

    Solves ``psi = L^{-1} (y - H(psi))`` one degree at a time, where ``L`` is
    the linear part and ``H`` the nonlinear part of ``phi``.  The powers
    ``psi^alpha`` needed by ``H`` are grown online, degree by degree, so the
    whole inverse costs about one composition.
    """
    if len(phi) != phi.nvars:
        raise ShapeMismatch("only square maps can be inverted")
    lin = phi.linear_part
    try:
        lin_inv = mat_inv(lin)
    except ZeroDivisionError:
        raise SingularMap("linear part of the map is singular") from None
    n, order = phi.nvars, phi.order
    base, powers = _layout(n, order)
    psi_b = [[dict() for _ in range(order + 1)] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if lin_inv[i][j]:
                psi_b[i][1][powers[j]] = lin_inv[i][j]
    h_terms = [[(exp, c) for exp, c in comp.items() if sum(exp) >= 2] for comp in phi]
    needed = set()
    for terms in h_terms:
        for exp, _ in terms:
            alpha = list(exp)
            while sum(alpha) >= 2:
                needed.add(tuple(alpha))
                j = max(i for i, e in enumerate(alpha) if e)
                alpha[j] -= 1
    chain = sorted(needed, key=lambda e: (sum(e), e))
    unit = {tuple(1 if k == j else 0 for k in range(n)): j for j in range(n)}
    table = {}
    for alpha in chain:
        table[alpha] = [dict() for _ in range(order + 1)]

    def buckets_of(alpha):
        j = unit.get(alpha)
        return psi_b[j] if j is not None else table[alpha]

    for k in range(2, order + 1):
        for alpha in chain:
            deg = sum(alpha)
            if deg > k:
                break
            j = max(i for i, e in enumerate(alpha) if e)
            prev = list(alpha)
            prev[j] -= 1
            prev = tuple(prev)
            table[alpha][k] = _bucket_product(buckets_of(prev), psi_b[j], k, deg - 1, 1)
        rhs = []
        for terms in h_terms:
            acc = {}
            for exp, c in terms:
                if sum(exp) > k:
                    continue
                for key, v in table[exp][k].items():
                    prev_v = acc.get(key)
                    acc[key] = v * c if prev_v is None else prev_v + v * c
            rhs.append(acc)
        for i in range(n):
            out = {}
            for j in range(n):
                a = lin_inv[i][j]
                if not a:
                    continue
                for key, v in rhs[j].items():
                    prev_v = out.get(key)
                    out[key] = -a * v if prev_v is None else prev_v - a * v
            psi_b[i][k] = {key: v for key, v in out.items() if v}
    return PolyMap([TruncatedSeries._from_buckets(n, order, b) for b in psi_b])


def pushforward(X: VectorFieldJet, phi: PolyMap) -> VectorFieldJet:
    """The field ``X`` written in the coordinates ``y = phi(x)``.

    Computes ``(Dphi . X) o phi^{-1}`` truncated at the common order; the
    linear part transforms as ``L A L^{-1}``.
    """
    if phi.nvars != X.nvars or phi.order != X.order or len(phi) != X.nvars:
        raise ShapeMismatch("field and map have different shapes")
    psi = invert_map(phi)
    jac = phi.jacobian()
    n = X.nvars
    pushed = []
    for i in range(n):
        buckets = [dict() for _ in range(X.order + 1)]
        for j in range(n):
            if not jac[i][j].is_zero() and not X[j].is_zero():
                _accumulate(buckets, mul_truncated(jac[i][j], X[j]), ONE)
        pushed.append(TruncatedSeries._from_buckets(n, X.order, buckets))
    return VectorFieldJet(compose_many(pushed, psi))


def lie_derivative(X: VectorFieldJet, f: TruncatedSeries) -> TruncatedSeries:
    """``X(f) = sum_j X_j df/dx_j``.

    Because ``X`` vanishes at the origin, each output degree only involves
    terms of ``f`` and ``X`` of at most that degree, so the result is exact
    through the full truncation order.
    """
    X[0]._check(f)
    buckets = [dict() for _ in range(f.order + 1)]
    for j, xj in enumerate(X):
        if xj.is_zero():
            continue
        df = f.derivative(j)
        if df.is_zero():
            continue
        _accumulate(buckets, mul_truncated(xj, df), ONE)
    return TruncatedSeries._from_buckets(f.nvars, f.order, buckets)


def lie_bracket(P: VectorFieldJet, Y: VectorFieldJet) -> VectorFieldJet:
    """``[P, Y]`` with components ``P(Y_i) - Y(P_i)``."""
    return VectorFieldJet([lie_derivative(P, yi) - lie_derivative(Y, pi) for yi, pi in zip(Y, P)])


def _require_flat_generator(P):
    low = P.lowest_degree()
    if low is not None and low < 2:
        raise ValueError("Lie-series generator must start at degree 2")


def flow_pushforward(X: VectorFieldJet, P: VectorFieldJet) -> VectorFieldJet:
    """Push ``X`` forward by the time-1 flow of ``P`` (``P`` of degree >= 2).

    Uses ``sum_k (-1)^k / k! ad_P^k X``; each bracket raises the degree, so
    the series terminates inside the truncation order.
    """
    _require_flat_generator(P)
    total = X
    term = X
    k = 0
    while True:
        k += 1
        term = lie_bracket(P, term)
        if term.is_zero():
            break
        total = total + term.scale(mpq((-1) ** k, factorial(k)))
    return total


def flow_pullback(g: TruncatedSeries, P: VectorFieldJet) -> TruncatedSeries:
    """``g o exp(P)``: the function ``g`` composed with the time-1 flow of ``P``."""
    _require_flat_generator(P)
    total = g
    term = g
    k = 0
    while True:
        k += 1
        term = lie_derivative(P, term)
        if term.is_zero():
            break
        total = total + term.scale(mpq(1, factorial(k)))
    return total


def series_det(matrix):
    """Determinant of a square matrix of series (Laplace expansion, memoised)."""
    r = len(matrix)
    if r == 0:
        return None
    memo = {}

    def minor(row, cols):
        if row == r:
            return None
        key = (row, cols)
        if key in memo:
            return memo[key]
        acc = None
        sign = 1
        for idx, c in enumerate(cols):
            entry = matrix[row][c]
            if not entry.is_zero():
                rest = cols[:idx] + cols[idx + 1:]
                sub = minor(row + 1, rest)
                term = entry if sub is None else mul_truncated(entry, sub)
                if sign < 0:
                    term = -term
                acc = term if acc is None else acc + term
            sign = -sign
        if acc is None:
            acc = TruncatedSeries.zero(matrix[0][0].nvars, matrix[0][0].order)
        memo[key] = acc
        return acc

    return minor(0, tuple(range(r)))


def jacobian_rank_series(F):
    """Generic rank of the Jacobian of ``F`` over truncated series.

    Returns ``(rank, minor)`` where ``minor`` is the first (row subsets, then
    column subsets, both lexicographic) maximal minor that is a nonzero
    series through degree ``order - 1``, where the derivatives are exact.
    """
    F = list(F)
    if not F:
        raise ValueError("need at least one series")
    n, order = F[0].nvars, F[0].order
    for f in F:
        F[0]._check(f)
    jac = [[f.derivative(j).truncate(order - 1) for j in range(n)] for f in F]
    for r in range(min(len(F), n), 0, -1):
        for rows in combinations(range(len(F)), r):
            for cols in combinations(range(n), r):
                sub = [[jac[i][j] for j in cols] for i in rows]
                m = series_det(sub).truncate(order - 1)
                if not m.is_zero():
                    return r, m
    return 0, TruncatedSeries.constant(n, order, 1)
