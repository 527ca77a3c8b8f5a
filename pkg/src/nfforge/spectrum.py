"""Linear part analysis: eigenvalues, semisimplicity, the four spectrum cases."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, isfinite

import gmpy2
import numpy as np
from gmpy2 import mpq

from .exact import (
    ONE, ZERO, charpoly, identity_matrix, mat_inv, mat_mul, minimal_polynomial,
    nullspace, poly_derivative, poly_divmod, poly_gcd, poly_trim, rank,
)

__all__ = [
    "Case",
    "LinearPart",
    "Spectrum",
    "SpectrumClass",
    "CanonicalForm",
    "SpectrumError",
    "MixedSpectrum",
    "NonCommensurable",
    "AllZero",
    "RootFindingFailed",
    "NotCanonicalizable",
    "eigenvalues_numeric",
    "semisimplicity_check",
    "classify_spectrum",
    "classify_matrix",
    "canonicalize_linear_part",
    "squarefree_decomposition",
]


class SpectrumError(ValueError):
    pass


class MixedSpectrum(SpectrumError):
    """Nonzero eigenvalues are neither all real nor all purely imaginary."""


class NonCommensurable(SpectrumError):
    """Eigenvalue ratios are not rational within the denominator bound."""


class AllZero(SpectrumError):
    """Every eigenvalue vanishes: the semisimple part of the linear part is zero."""


class RootFindingFailed(SpectrumError):
    pass


class NotCanonicalizable(SpectrumError):
    """No exact rational basis brings the matrix to canonical form."""


class Case(str, enum.Enum):
    STRONG_HYPERBOLIC = "StrongHyperbolic"
    WEAK_HYPERBOLIC = "WeakHyperbolic"
    STRONG_ELLIPTIC = "StrongElliptic"
    WEAK_ELLIPTIC = "WeakElliptic"

    @property
    def elliptic(self) -> bool:
        return self in (Case.STRONG_ELLIPTIC, Case.WEAK_ELLIPTIC)

    @property
    def weak(self) -> bool:
        return self in (Case.WEAK_HYPERBOLIC, Case.WEAK_ELLIPTIC)


@dataclass(frozen=True)
class LinearPart:
    matrix: tuple

    def __init__(self, matrix):
        rows = tuple(tuple(mpq(v) for v in row) for row in matrix)
        if any(len(r) != len(rows) for r in rows):
            raise ValueError("linear part must be square")
        object.__setattr__(self, "matrix", rows)

    @property
    def n(self):
        return len(self.matrix)

    def as_lists(self):
        return [list(r) for r in self.matrix]


def _as_matrix(A):
    if isinstance(A, LinearPart):
        return A.as_lists()
    return LinearPart(A).as_lists()


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: tuple  # complex, with multiplicity
    clusters: tuple  # (squarefree factor coefficients, multiplicity)

    def __iter__(self):
        return iter(self.eigenvalues)


@dataclass(frozen=True)
class SpectrumClass:
    case: Case
    k: int
    m: tuple
    lam: float

    def __post_init__(self):
        nonzero = [abs(v) for v in self.m if v]
        if not nonzero:
            raise ValueError("at least one entry of m must be nonzero")
        g = 0
        for v in nonzero:
            g = gcd(g, v)
        if g != 1:
            raise ValueError(f"m={self.m} is not primitive")
        if sum(1 for v in self.m if v == 0) != self.k:
            raise ValueError("k must count the zero entries of m")
        if not self.case.weak and self.k:
            raise ValueError("strong cases have no zero eigenvalue")

    @property
    def n(self):
        return len(self.m)

    @property
    def elliptic(self):
        return self.case.elliptic

    def to_dict(self):
        return {"case": self.case.value, "k": self.k, "m": list(self.m), "lambda": self.lam}


def _poly_sub(a, b):
    width = max(len(a), len(b))
    return poly_trim([(a[j] if j < len(a) else ZERO) - (b[j] if j < len(b) else ZERO)
                      for j in range(width)])


def squarefree_decomposition(p):
    """Yun's algorithm: list of ``(monic squarefree factor, multiplicity)``."""
    p = poly_trim(p)
    lead = p[-1]
    p = [c / lead for c in p]
    out = []
    dp = poly_derivative(p)
    a = poly_gcd(p, dp)
    b, _ = poly_divmod(p, a)
    c, _ = poly_divmod(dp, a)
    d = _poly_sub(c, poly_derivative(b))
    i = 1
    while len(b) > 1:
        a = poly_gcd(b, d)
        if len(a) > 1:
            out.append((a, i))
        b, _ = poly_divmod(b, a)
        c, _ = poly_divmod(d, a)
        d = _poly_sub(c, poly_derivative(b))
        i += 1
    return out


def _polish(coeffs, root, iters=50):
    """Newton refinement of a simple root of the polynomial (low-first floats)."""
    p = np.polynomial.Polynomial(coeffs)
    dp = p.deriv()
    z = complex(root)
    for _ in range(iters):
        fz = p(z)
        dz = dp(z)
        if dz == 0:
            break
        step = fz / dz
        z -= step
        if abs(step) <= 1e-16 * max(1.0, abs(z)):
            break
    return z


def eigenvalues_numeric(A) -> Spectrum:
    """All eigenvalues with multiplicity.

    The exact characteristic polynomial is split into squarefree factors
    first, so every numeric root solve is of a polynomial with simple roots,
    followed by Newton polishing.
    """
    mat = _as_matrix(A)
    n = len(mat)
    if n == 0:
        return Spectrum((), ())
    cp = charpoly(mat)
    clusters = squarefree_decomposition(cp)
    eigs = []
    for factor, mult in clusters:
        fl = [float(c) for c in factor]
        deg = len(fl) - 1
        if deg == 1:
            roots = [complex(-fl[0] / fl[1])]
        else:
            roots = np.roots(fl[::-1])
        for r in roots:
            z = _polish(fl, r)
            if not (isfinite(z.real) and isfinite(z.imag)):
                raise RootFindingFailed("root polishing diverged")
            resid = abs(np.polynomial.Polynomial(fl)(z))
            scale = sum(abs(c) * abs(z) ** j for j, c in enumerate(fl)) or 1.0
            if resid > 1e-10 * scale:
                raise RootFindingFailed(f"root {z} did not converge (residual {resid:.3e})")
            if abs(z.imag) <= 1e-14 * max(1.0, abs(z)):
                z = complex(z.real, 0.0)
            if abs(z.real) <= 1e-14 * max(1.0, abs(z)):
                z = complex(0.0, z.imag)
            eigs.extend([z] * mult)
    eigs.sort(key=lambda z: (-z.real, -z.imag))
    return Spectrum(tuple(eigs), tuple((tuple(f), m) for f, m in clusters))


def semisimplicity_check(A) -> bool:
    """True iff the exact minimal polynomial is squarefree."""
    mat = _as_matrix(A)
    if not mat:
        return True
    mp = minimal_polynomial(mat)
    return len(poly_gcd(mp, poly_derivative(mp))) == 1


def _rationalize(x, max_den, tol):
    f = Fraction(x).limit_denominator(max_den)
    if abs(float(f) - x) > tol * max(1.0, abs(x)):
        return None
    return f


def classify_spectrum(s, tol: float = 1e-9, *, kind_tol: float = 1e-7,
                      max_den: int = 64, ratio_tol: float = 1e-7) -> SpectrumClass:
    """Case, zero multiplicity ``k``, primitive integer vector ``m`` and ``lam``.

    Eigenvalue ``j`` is ``m[j] * lam`` (hyperbolic) or ``i * m[j] * lam``
    (elliptic).  Ordering of ``m``: zeros first, then hyperbolic entries in
    descending order, or elliptic pairs ``(a, -a)`` by increasing ``a``.
    """
    eigs = [complex(z) for z in s]
    if not eigs:
        raise AllZero("empty spectrum")
    scale = max(abs(z) for z in eigs)
    if scale == 0:
        raise AllZero("all eigenvalues vanish")
    zeros = [z for z in eigs if abs(z) < tol * scale]
    nonzero = [z for z in eigs if abs(z) >= tol * scale]
    real, imag = [], []
    for z in nonzero:
        if abs(z.imag) <= kind_tol * abs(z):
            real.append(z.real)
        elif abs(z.real) <= kind_tol * abs(z):
            imag.append(z.imag)
        else:
            raise MixedSpectrum(f"eigenvalue {z} is neither real nor purely imaginary")
    if real and imag:
        raise MixedSpectrum("real and imaginary nonzero eigenvalues coexist")
    elliptic = bool(imag)
    vals = imag if elliptic else real
    ref = min(vals, key=abs)
    ratios = []
    for v in vals:
        f = _rationalize(v / ref, max_den, ratio_tol)
        if f is None:
            raise NonCommensurable(f"ratio {v / ref!r} is not rational with denominator <= {max_den}")
        ratios.append(f)
    lcm = 1
    for f in ratios:
        lcm = lcm * f.denominator // gcd(lcm, f.denominator)
    ints = [int(f * lcm) for f in ratios]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    sign = 1 if ref > 0 else -1
    m_nonzero = [sign * v // g for v in ints]
    lam = float(np.mean([abs(v) / abs(mi) for v, mi in zip(vals, m_nonzero)]))
    if elliptic:
        pos = sorted(v for v in m_nonzero if v > 0)
        neg = sorted((-v for v in m_nonzero if v < 0))
        if pos != neg:
            raise MixedSpectrum("imaginary eigenvalues are not closed under conjugation")
        ordered = []
        for a in pos:
            ordered.extend([a, -a])
    else:
        ordered = sorted(m_nonzero, reverse=True)
    k = len(zeros)
    m = tuple([0] * k + ordered)
    if elliptic:
        case = Case.WEAK_ELLIPTIC if k else Case.STRONG_ELLIPTIC
    else:
        case = Case.WEAK_HYPERBOLIC if k else Case.STRONG_HYPERBOLIC
    return SpectrumClass(case, k, m, lam)


def classify_matrix(A, **kw) -> SpectrumClass:
    return classify_spectrum(eigenvalues_numeric(A), **kw)


@dataclass(frozen=True)
class CanonicalForm:
    """Exact change of basis ``T`` with ``T^{-1} A T = scale * integer_matrix``."""

    T: tuple
    T_inv: tuple
    matrix: tuple
    integer_matrix: tuple
    scale: object  # exact positive rational lam
    m: tuple

    def lists(self, name):
        return [list(r) for r in getattr(self, name)]


def canonical_matrix(m, elliptic):
    """Integer canonical matrix for the ordered vector ``m``."""
    n = len(m)
    C = [[ZERO] * n for _ in range(n)]
    i = 0
    while i < n:
        if m[i] == 0 or not elliptic:
            C[i][i] = mpq(m[i])
            i += 1
        else:
            a = m[i]
            C[i][i + 1] = mpq(-a)
            C[i + 1][i] = mpq(a)
            i += 2
    return C


def _exact_sqrt(q):
    q = mpq(q)
    if q < 0:
        return None
    num, den = gmpy2.mpz(q.numerator), gmpy2.mpz(q.denominator)
    if not (gmpy2.is_square(num) and gmpy2.is_square(den)):
        return None
    return mpq(gmpy2.isqrt(num), gmpy2.isqrt(den))


def _expected_charpoly(m, lam, elliptic):
    p = [ONE]

    def mul(p, q):
        out = [ZERO] * (len(p) + len(q) - 1)
        for i, a in enumerate(p):
            for j, b in enumerate(q):
                out[i + j] += a * b
        return out

    if elliptic:
        zeros = [v for v in m if v == 0]
        pos = [v for v in m if v > 0]
        for _ in zeros:
            p = mul(p, [ZERO, ONE])
        for a in pos:
            p = mul(p, [(a * lam) ** 2, ZERO, ONE])
    else:
        for v in m:
            p = mul(p, [-v * lam, ONE])
    return p


def canonicalize_linear_part(A, cls: SpectrumClass) -> CanonicalForm:
    """Exact rational basis bringing ``A`` to canonical block form.

    Raises :class:`NotCanonicalizable` when the characteristic polynomial
    does not split into the rational linear/quadratic factors that ``cls``
    predicts, or when ``A`` is not semisimple.
    """
    mat = _as_matrix(A)
    n = len(mat)
    if n != len(cls.m):
        raise ValueError("classification does not match the matrix size")
    if not semisimplicity_check(mat):
        raise NotCanonicalizable("linear part is not semisimple")
    sq = sum(v * v for v in cls.m)
    a2 = mat_mul(mat, mat)
    tr2 = sum((a2[i][i] for i in range(n)), ZERO)
    lam2 = (-tr2 if cls.elliptic else tr2) / sq
    lam = _exact_sqrt(lam2)
    if lam is None or lam == 0:
        raise NotCanonicalizable(f"lambda^2 = {lam2} is not the square of a rational")
    if poly_trim(charpoly(mat)) != poly_trim(_expected_charpoly(cls.m, lam, cls.elliptic)):
        raise NotCanonicalizable("characteristic polynomial does not match the classification exactly")
    cols = []
    i = 0
    done_vals = set()
    m = cls.m
    while i < n:
        v = m[i]
        if v == 0 or not cls.elliptic:
            if v in done_vals:
                i += 1
                continue
            done_vals.add(v)
            mu = v * lam
            shifted = [[mat[r][c] - (mu if r == c else ZERO) for c in range(n)] for r in range(n)]
            basis = nullspace(shifted, n)
            if len(basis) != m.count(v):
                raise NotCanonicalizable(f"eigenspace of {mu} has the wrong dimension")
            cols.extend(basis)
            i += 1
        else:
            a = abs(v)
            if a in done_vals:
                i += 2
                continue
            done_vals.add(a)
            alpha = a * lam
            shifted = [[a2[r][c] + (alpha * alpha if r == c else ZERO) for c in range(n)]
                       for r in range(n)]
            basis = nullspace(shifted, n)
            need = 2 * sum(1 for x in m if x == a)
            if len(basis) != need:
                raise NotCanonicalizable(f"invariant plane for +-i{alpha} has the wrong dimension")
            chosen = []
            for cand in basis:
                if rank(chosen + [cand]) == len(chosen) + 1:
                    w = [sum((mat[r][c] * cand[c] for c in range(n)), ZERO) / alpha for r in range(n)]
                    chosen.extend([cand, w])
                if len(chosen) == need:
                    break
            if len(chosen) != need:
                raise NotCanonicalizable("could not build a rational rotation basis")
            cols.extend(chosen)
            i += 2
    T = [[cols[c][r] for c in range(n)] for r in range(n)]
    try:
        T_inv = mat_inv(T)
    except ZeroDivisionError:
        raise NotCanonicalizable("eigenvectors are not independent") from None
    C = mat_mul(T_inv, mat_mul(mat, T))
    Cint = canonical_matrix(m, cls.elliptic)
    expected = [[lam * c for c in row] for row in Cint]
    if C != expected:
        raise NotCanonicalizable("change of basis did not produce the canonical form")
    tup = lambda M: tuple(tuple(r) for r in M)
    return CanonicalForm(tup(T), tup(T_inv), tup(C), tup(Cint), lam, tuple(m))


def identity_canonical(cls: SpectrumClass, lam=ONE) -> CanonicalForm:
    n = len(cls.m)
    Cint = canonical_matrix(cls.m, cls.elliptic)
    ident = identity_matrix(n)
    tup = lambda M: tuple(tuple(r) for r in M)
    return CanonicalForm(tup(ident), tup(ident), tup([[lam * c for c in r] for r in Cint]),
                         tup(Cint), mpq(lam), tuple(cls.m))
