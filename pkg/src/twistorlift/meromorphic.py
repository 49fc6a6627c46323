"""Rational functions of one complex variable and the vector objects built on them.

``RatFun`` stores ascending coefficient arrays.  ``MeroVec`` is a vector of
``RatFun`` components and ``LaurentSection`` is a finite Laurent polynomial in
the loop parameter ``lam`` whose coefficients are ``MeroVec`` objects.
"""

from __future__ import annotations

import math
from numbers import Number

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import CapacityError, DomainError, PoleError

MAX_DEGREE = 64
MAX_EXPONENT = 16
GCD_TOL = 1e-10
POLE_TOL = 1e-12


def _as_poly(coeffs):
    arr = np.atleast_1d(np.asarray(coeffs, dtype=complex)).ravel()
    if arr.size == 0:
        arr = np.zeros(1, dtype=complex)
    return arr


def _trim(p, tol):
    nz = np.nonzero(np.abs(p) > tol)[0]
    if nz.size == 0:
        return np.zeros(1, dtype=complex)
    return p[: nz[-1] + 1].copy()


def _approx_gcd(a, b):
    """Euclidean gcd with coefficients below ``GCD_TOL`` treated as zero."""
    a = a / np.max(np.abs(a))
    b = b / np.max(np.abs(b))
    if a.size < b.size:
        a, b = b, a
    while b.size > 1:
        _, rem = npoly.polydiv(a, b)
        rem = _trim(rem, GCD_TOL * max(np.max(np.abs(a)), np.max(np.abs(b))))
        if not np.any(rem):
            return b
        a, b = b, rem / np.max(np.abs(rem))
    return np.ones(1, dtype=complex)


def _check_degree(p):
    if p.size - 1 > MAX_DEGREE:
        raise CapacityError(f"polynomial degree {p.size - 1} exceeds cap {MAX_DEGREE}")


class RatFun:
    """A complex rational function ``num / den`` kept in reduced form."""

    __slots__ = ("num", "den")

    def __init__(self, num, den=(1.0,), reduce=True):
        num = _as_poly(num)
        den = _as_poly(den)
        if not np.any(den):
            raise DomainError("denominator is identically zero")
        _check_degree(num)
        _check_degree(den)
        if reduce:
            num, den = self._reduce(num, den)
        self.num = num
        self.den = den
        self.num.setflags(write=False)
        self.den.setflags(write=False)

    @staticmethod
    def _reduce(num, den):
        den = _trim(den, GCD_TOL * np.max(np.abs(den)))
        scale = np.max(np.abs(num))
        num = _trim(num, GCD_TOL * scale) if scale > 0 else np.zeros(1, dtype=complex)
        if not np.any(num):
            return np.zeros(1, dtype=complex), np.ones(1, dtype=complex)
        if den.size > 1 and num.size > 1:
            g = _approx_gcd(num, den)
            if g.size > 1:
                num = npoly.polydiv(num, g)[0]
                den = npoly.polydiv(den, g)[0]
        # a monomial z^k in both parts is handled by the gcd; normalise den
        lead = den[-1]
        if lead != 1:
            num = num / lead
            den = den / lead
        return num, den

    @classmethod
    def constant(cls, c):
        return cls([c])

    @classmethod
    def monomial(cls, k, c=1.0):
        coeffs = np.zeros(k + 1, dtype=complex)
        coeffs[k] = c
        return cls(coeffs)

    @staticmethod
    def coerce(x):
        if isinstance(x, RatFun):
            return x
        if isinstance(x, Number):
            return RatFun([x])
        raise TypeError(f"cannot interpret {type(x).__name__} as RatFun")

    @property
    def degree(self):
        return max(self.num.size, self.den.size) - 1

    def is_zero(self):
        return not np.any(self.num)

    def is_polynomial(self):
        return self.den.size == 1

    # arithmetic
    def __add__(self, other):
        other = RatFun.coerce(other)
        if self.is_polynomial() and other.is_polynomial():
            return RatFun(npoly.polyadd(self.num / self.den[0], other.num / other.den[0]))
        return RatFun(
            npoly.polyadd(npoly.polymul(self.num, other.den), npoly.polymul(other.num, self.den)),
            npoly.polymul(self.den, other.den),
        )

    __radd__ = __add__

    def __neg__(self):
        return RatFun(-self.num, self.den, reduce=False)

    def __sub__(self, other):
        return self + (-RatFun.coerce(other))

    def __rsub__(self, other):
        return RatFun.coerce(other) - self

    def __mul__(self, other):
        other = RatFun.coerce(other)
        return RatFun(npoly.polymul(self.num, other.num), npoly.polymul(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = RatFun.coerce(other)
        if other.is_zero():
            raise DomainError("division by the zero function")
        return RatFun(npoly.polymul(self.num, other.den), npoly.polymul(self.den, other.num))

    def __rtruediv__(self, other):
        return RatFun.coerce(other) / self

    def derivative(self):
        if self.is_polynomial():
            if self.num.size == 1:
                return RatFun([0.0])
            return RatFun(npoly.polyder(self.num) / self.den[0])
        dn = npoly.polyder(self.num) if self.num.size > 1 else np.zeros(1, dtype=complex)
        dd = npoly.polyder(self.den)
        top = npoly.polysub(npoly.polymul(dn, self.den), npoly.polymul(self.num, dd))
        return RatFun(top, npoly.polymul(self.den, self.den))

    def _check_pole(self, z, component=None):
        d = npoly.polyval(z, self.den)
        if abs(d) < POLE_TOL * (1.0 + abs(z)) ** (self.den.size - 1):
            raise PoleError(f"pole at z={z!r}", component=component)
        return d

    def __call__(self, z, component=None):
        d = self._check_pole(z, component)
        return npoly.polyval(z, self.num) / d

    def taylor(self, z0, order, component=None):
        """Coefficients of the expansion in ``u = z - z0`` up to ``u**order``."""
        self._check_pole(z0, component)
        a = _shifted(self.num, z0, order)
        d = _shifted(self.den, z0, order)
        out = np.zeros(order + 1, dtype=complex)
        for k in range(order + 1):
            acc = a[k]
            for j in range(1, k + 1):
                acc -= d[j] * out[k - j]
            out[k] = acc / d[0]
        return out

    def allclose(self, other, rtol=1e-12):
        other = RatFun.coerce(other)
        pts = np.array([0.31 + 0.17j, -0.7 + 0.4j, 1.3 - 0.9j, 0.05 - 1.1j])
        a = np.array([self(p) for p in pts])
        b = np.array([other(p) for p in pts])
        return bool(np.all(np.abs(a - b) <= rtol * np.maximum(1.0, np.abs(b))))

    def __repr__(self):
        return f"RatFun(num={self.num.tolist()}, den={self.den.tolist()})"

    def to_json(self):
        return {"num": _poly_to_json(self.num), "den": _poly_to_json(self.den)}

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or set(obj) != {"num", "den"}:
            raise DomainError("RatFun JSON must have exactly the keys num and den")
        return cls(_poly_from_json(obj["num"]), _poly_from_json(obj["den"]), reduce=False)


def _shifted(p, z0, order):
    """Taylor coefficients of the polynomial ``p`` about ``z0``."""
    out = np.zeros(order + 1, dtype=complex)
    q = p.copy()
    for k in range(min(order, p.size - 1) + 1):
        out[k] = npoly.polyval(z0, q) / math.factorial(k)
        if q.size > 1:
            q = npoly.polyder(q)
        else:
            break
    return out


def _poly_to_json(p):
    return [[float(c.real), float(c.imag)] for c in p]


def _poly_from_json(data):
    if not isinstance(data, list) or not data:
        raise DomainError("polynomial JSON must be a non-empty list")
    out = []
    for c in data:
        if not (isinstance(c, list) and len(c) == 2):
            raise DomainError("complex scalar JSON must be [re, im]")
        out.append(complex(float(c[0]), float(c[1])))
    return np.array(out, dtype=complex)


class MeroVec:
    """A meromorphic map into C^n stored componentwise."""

    __slots__ = ("components",)

    def __init__(self, components):
        comps = tuple(RatFun.coerce(c) for c in components)
        if not comps:
            raise DomainError("MeroVec needs at least one component")
        self.components = comps

    @property
    def n(self):
        return len(self.components)

    @classmethod
    def constant(cls, vec):
        return cls([RatFun([c]) for c in np.asarray(vec, dtype=complex)])

    @classmethod
    def from_polynomials(cls, coeff_lists):
        """Build from one ascending coefficient list per component."""
        return cls([RatFun(c) for c in coeff_lists])

    @classmethod
    def zeros(cls, n):
        return cls([RatFun([0.0]) for _ in range(n)])

    def is_zero(self):
        return all(c.is_zero() for c in self.components)

    def __call__(self, z):
        return np.array([c(z, component=i) for i, c in enumerate(self.components)], dtype=complex)

    def differentiate(self, k=1):
        if k < 0:
            raise DomainError("derivative order must be non-negative")
        comps = self.components
        for _ in range(k):
            comps = tuple(c.derivative() for c in comps)
        return MeroVec(comps)

    def taylor(self, z0, order):
        """Array of shape ``(order + 1, n)`` of expansion coefficients at ``z0``."""
        return np.stack([c.taylor(z0, order, component=i) for i, c in enumerate(self.components)], axis=1)

    def _check(self, other):
        if not isinstance(other, MeroVec) or other.n != self.n:
            raise DomainError("MeroVec operands must share ambient dimension")

    def __add__(self, other):
        self._check(other)
        return MeroVec([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        self._check(other)
        return MeroVec([a - b for a, b in zip(self.components, other.components)])

    def __neg__(self):
        return MeroVec([-a for a in self.components])

    def scale(self, f):
        f = RatFun.coerce(f)
        return MeroVec([f * a for a in self.components])

    def __rmul__(self, f):
        return self.scale(f)

    def __repr__(self):
        return f"MeroVec(n={self.n})"

    def to_json(self):
        return [c.to_json() for c in self.components]

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, list) or not data:
            raise DomainError("MeroVec JSON must be a non-empty list")
        return cls([RatFun.from_json(c) for c in data])


def _check_exponent(k):
    if not -MAX_EXPONENT <= k <= MAX_EXPONENT:
        raise CapacityError(f"lambda exponent {k} outside [-{MAX_EXPONENT}, {MAX_EXPONENT}]")


class LaurentSection:
    """Finite sum ``sum_k lam**k * terms[k]`` with ``MeroVec`` coefficients."""

    __slots__ = ("terms", "n")

    def __init__(self, terms, n=None):
        clean = {}
        for k, v in dict(terms).items():
            k = int(k)
            _check_exponent(k)
            if not isinstance(v, MeroVec):
                raise DomainError("LaurentSection coefficients must be MeroVec")
            if n is None:
                n = v.n
            if v.n != n:
                raise DomainError("LaurentSection coefficients must share ambient dimension")
            if not v.is_zero():
                clean[k] = v
        if n is None:
            raise DomainError("ambient dimension unknown for an empty LaurentSection")
        self.terms = dict(sorted(clean.items()))
        self.n = n

    @classmethod
    def single(cls, exponent, vec):
        return cls({exponent: vec})

    def is_zero(self):
        return not self.terms

    def coefficient(self, k):
        """The coefficient ``P_k`` of ``lam**k``."""
        return self.terms.get(k, MeroVec.zeros(self.n))

    def exponents(self):
        return list(self.terms)

    def __call__(self, z, lam):
        if lam == 0:
            raise DomainError("lambda must be nonzero")
        out = np.zeros(self.n, dtype=complex)
        for k, v in self.terms.items():
            out += lam**k * v(z)
        return out

    def shift(self, k):
        """Multiply by ``lam**k``."""
        return LaurentSection({e + k: v for e, v in self.terms.items()}, self.n)

    def differentiate(self, k=1):
        return LaurentSection({e: v.differentiate(k) for e, v in self.terms.items()}, self.n)

    def __add__(self, other):
        if not isinstance(other, LaurentSection) or other.n != self.n:
            raise DomainError("LaurentSection operands must share ambient dimension")
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return LaurentSection(terms, self.n)

    def __repr__(self):
        return f"LaurentSection(n={self.n}, exponents={self.exponents()})"

    def to_json(self):
        return {str(k): v.to_json() for k, v in self.terms.items()}

    @classmethod
    def from_json(cls, data, n=None):
        if not isinstance(data, dict):
            raise DomainError("LaurentSection JSON must be an object")
        terms = {}
        for key, vec in data.items():
            try:
                k = int(key)
            except ValueError as exc:
                raise DomainError(f"bad exponent key {key!r}") from exc
            terms[k] = MeroVec.from_json(vec)
        return cls(terms, n)


def rat_arith(a, b, op):
    """Apply ``op`` in {add, sub, mul, div} to two rational functions."""
    a, b = RatFun.coerce(a), RatFun.coerce(b)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise DomainError(f"unknown operation {op!r}")


def differentiate(v, k=1):
    if isinstance(v, RatFun):
        if k < 0:
            raise DomainError("derivative order must be non-negative")
        for _ in range(k):
            v = v.derivative()
        return v
    return v.differentiate(k)


def evaluate(v, z, lam=None):
    """Evaluate a MeroVec at ``z`` or a LaurentSection at ``(z, lam)``."""
    if isinstance(v, LaurentSection):
        if lam is None:
            raise DomainError("lambda is required for a LaurentSection")
        return v(z, lam)
    return v(z)


def order(section):
    """Least exponent with a nonzero coefficient."""
    if section.is_zero():
        raise DomainError("the zero section has no order")
    return min(section.terms)
