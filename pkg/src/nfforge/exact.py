"""Exact scalars and small exact linear algebra.

Coefficients are ``gmpy2.mpq`` rationals, promoted to :class:`QI` (Gaussian
rationals) only where complex values actually occur.  Every routine here is
generic over any field whose elements support ``+ - * /`` and ``== 0``.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational

from gmpy2 import mpq

__all__ = [
    "QI",
    "I",
    "to_scalar",
    "parse_rational",
    "is_real",
    "real_part",
    "imag_part",
    "conj",
    "rref",
    "solve_lex_first",
    "nullspace",
    "rank",
    "det",
    "mat_inv",
    "mat_mul",
    "identity_matrix",
    "charpoly",
    "minimal_polynomial",
    "poly_gcd",
    "poly_derivative",
    "poly_divmod",
    "poly_eval",
    "poly_trim",
]

ZERO = mpq(0)
ONE = mpq(1)


_MPQ = type(mpq(0))


def _qi(re, im):
    obj = object.__new__(QI)
    obj.re = re
    obj.im = im
    return obj


class QI:
    """Gaussian rational ``re + im*i`` with ``mpq`` parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = mpq(re)
        self.im = mpq(im)

    @staticmethod
    def _coerce(other):
        t = type(other)
        if t is QI:
            return other
        if t is _MPQ or t is int or isinstance(other, (int, Rational)):
            return _qi(mpq(other), ZERO)
        return None

    # fast paths first: these methods dominate exact series arithmetic
    def __add__(self, other):
        t = type(other)
        if t is QI:
            return _qi(self.re + other.re, self.im + other.im)
        if t is _MPQ or t is int:
            return _qi(self.re + other, self.im)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return _qi(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        t = type(other)
        if t is QI:
            return _qi(self.re - other.re, self.im - other.im)
        if t is _MPQ or t is int:
            return _qi(self.re - other, self.im)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return _qi(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return _qi(o.re - self.re, o.im - self.im)

    def __mul__(self, other):
        t = type(other)
        if t is QI:
            a, b, c, d = self.re, self.im, other.re, other.im
            return _qi(a * c - b * d, a * d + b * c)
        if t is _MPQ or t is int:
            return _qi(self.re * other, self.im * other)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return _qi(self.re * o.re, self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("Gaussian rational division by zero")
        return _qi((self.re * o.re + self.im * o.im) / den,
                   (self.im * o.re - self.re * o.im) / den)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __neg__(self):
        return _qi(-self.re, -self.im)

    def __pos__(self):
        return self

    def __eq__(self, other):
        if type(other) is QI:
            return self.re == other.re and self.im == other.im
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def conjugate(self):
        return _qi(self.re, -self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"QI({self.re}, {self.im})"


I = QI(0, 1)


def to_scalar(value):
    """Coerce ints, Fractions, mpq, QI or ``complex`` with rational parts."""
    if isinstance(value, QI):
        return value if value.im != 0 else value.re
    if isinstance(value, complex):
        if value.imag == 0:
            return mpq(Fraction(value.real))
        return QI(Fraction(value.real), Fraction(value.imag))
    if isinstance(value, float):
        return mpq(Fraction(value))
    return mpq(value)


def parse_rational(text: str):
    """Parse ``"p/q"``, an integer or a finite decimal literal exactly."""
    if not isinstance(text, str):
        if isinstance(text, int) and not isinstance(text, bool):
            return mpq(text)
        raise ValueError(f"rational literal must be a string, got {text!r}")
    try:
        frac = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad rational literal {text!r}") from exc
    return mpq(frac.numerator, frac.denominator)


def is_real(c) -> bool:
    return not isinstance(c, QI) or c.im == 0


def real_part(c):
    return c.re if isinstance(c, QI) else c


def imag_part(c):
    return c.im if isinstance(c, QI) else ZERO


def conj(c):
    return c.conjugate() if isinstance(c, QI) else c


# ---------------------------------------------------------------- matrices


def identity_matrix(n):
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def mat_mul(a, b):
    inner = len(b)
    cols = len(b[0]) if b else 0
    return [[sum((a[i][k] * b[k][j] for k in range(inner)), ZERO) for j in range(cols)]
            for i in range(len(a))]


def rref(rows, pivot_cols=None):
    """Reduced row echelon form; returns ``(matrix, pivot_columns)``.

    Pivots are chosen left to right with the first nonzero entry in each
    column, so the result is deterministic.  Only the first ``pivot_cols``
    columns are eligible as pivots (augmented systems).
    """
    m = [list(r) for r in rows]
    if not m:
        return m, []
    ncols = len(m[0]) if pivot_cols is None else pivot_cols
    pivots = []
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, len(m)):
            if m[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = ONE / m[r][c]
        m[r] = [v * inv for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [vi - f * vr for vi, vr in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(rows) -> int:
    return len(rref(rows)[1])


def solve_lex_first(a, b):
    """Solve ``a x = b`` exactly; free variables are set to zero.

    Returns ``(x, consistent)``.  When inconsistent, ``x`` still solves the
    pivot rows, which makes the leftover ``b - a x`` well defined for
    reporting.
    """
    ncols = len(a[0]) if a else 0
    aug = [list(row) + [rhs] for row, rhs in zip(a, b)]
    red, pivots = rref(aug, pivot_cols=ncols)
    consistent = all(row[ncols] == 0 for row in red[len(pivots):])
    x = [ZERO] * ncols
    for row, c in zip(red, pivots):
        x[c] = row[ncols]
    return x, consistent


def nullspace(rows, ncols=None):
    """Basis of the right kernel, one vector per free column (in order)."""
    if ncols is None:
        ncols = len(rows[0]) if rows else 0
    if not rows:
        return [[ONE if i == j else ZERO for i in range(ncols)] for j in range(ncols)]
    red, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [ZERO] * ncols
        v[fc] = ONE
        for row, pc in zip(red, pivots):
            v[pc] = -row[fc]
        basis.append(v)
    return basis


def det(rows):
    """Determinant by Gaussian elimination in exact arithmetic."""
    m = [list(r) for r in rows]
    n = len(m)
    result = ONE
    for c in range(n):
        piv = next((i for i in range(c, n) if m[i][c] != 0), None)
        if piv is None:
            return ZERO
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            result = -result
        result = result * m[c][c]
        inv = ONE / m[c][c]
        for i in range(c + 1, n):
            if m[i][c] != 0:
                f = m[i][c] * inv
                m[i] = [vi - f * vc for vi, vc in zip(m[i], m[c])]
    return result


def mat_inv(rows):
    n = len(rows)
    aug = [list(r) + e for r, e in zip(rows, identity_matrix(n))]
    red, pivots = rref(aug)
    if pivots[:n] != list(range(n)):
        raise ZeroDivisionError("singular matrix")
    return [row[n:] for row in red]


# ------------------------------------------------------ univariate polys
# Coefficient lists, lowest degree first.


def poly_trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def poly_eval(p, t):
    acc = ZERO
    for c in reversed(p):
        acc = acc * t + c
    return acc


def poly_derivative(p):
    return poly_trim([k * p[k] for k in range(1, len(p))])


def poly_divmod(num, den):
    num = poly_trim(num)
    den = poly_trim(den)
    if not den:
        raise ZeroDivisionError("polynomial division by zero")
    q = [ZERO] * max(len(num) - len(den) + 1, 1)
    r = list(num)
    lead = den[-1]
    while len(r) >= len(den) and r:
        shift = len(r) - len(den)
        f = r[-1] / lead
        q[shift] = f
        for i, d in enumerate(den):
            r[shift + i] -= f * d
        r = poly_trim(r)
    return poly_trim(q), r


def poly_gcd(a, b):
    """Monic gcd over the rationals."""
    a, b = poly_trim(a), poly_trim(b)
    while b:
        _, r = poly_divmod(a, b)
        a, b = b, r
    if not a:
        return []
    lead = a[-1]
    return [c / lead for c in a]


def charpoly(matrix):
    """Characteristic polynomial ``det(t I - A)`` (monic) by Faddeev-LeVerrier."""
    n = len(matrix)
    a = [[mpq(v) for v in row] for row in matrix]
    coeffs = [ZERO] * (n + 1)
    coeffs[n] = ONE
    m = [[ZERO] * n for _ in range(n)]
    for k in range(1, n + 1):
        # M_k = A M_{k-1} + c_{n-k+1} I
        am = mat_mul(a, m) if k > 1 else [[ZERO] * n for _ in range(n)]
        for i in range(n):
            am[i][i] += coeffs[n - k + 1]
        m = am
        am2 = mat_mul(a, m)
        tr = sum((am2[i][i] for i in range(n)), ZERO)
        coeffs[n - k] = -tr / k
    return coeffs


def minimal_polynomial(matrix):
    """Exact monic minimal polynomial via the first Krylov dependency of powers."""
    n = len(matrix)
    a = [[mpq(v) for v in row] for row in matrix]
    powers = [identity_matrix(n)]
    for k in range(1, n + 1):
        powers.append(mat_mul(a, powers[-1]))
        # columns = flattened powers; look for a dependency with leading A^k
        cols = [[p[i][j] for i in range(n) for j in range(n)] for p in powers]
        rows = [list(r) for r in zip(*cols)]
        kern = nullspace(rows, k + 1)
        if kern:
            v = kern[0]
            lead = v[-1]
            if lead != 0:
                return [c / lead for c in v]
    raise ArithmeticError("Krylov sequence did not close (unreachable for square input)")
