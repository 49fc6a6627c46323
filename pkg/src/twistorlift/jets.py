"""Truncated Taylor jets of matrix-valued functions in ``(z, zbar)``.

A jet of order K at a point z0 stores the coefficients ``c[p, q]`` of
``(z - z0)**p * conj(z - z0)**q`` for ``p + q <= K``.  Products, inverses,
conjugation and the derivatives d/dz, d/dzbar are exact on these
coefficients, so differentiating a chain of projector formulas costs no
finite-difference error.  A derivative lowers the order by one.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import DomainError


class _Tables:
    def __init__(self, order):
        self.order = order
        monos = [(p, d - p) for d in range(order + 1) for p in range(d, -1, -1)]
        self.monos = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.size = len(monos)
        left, right, target = [], [], []
        for i, (p1, q1) in enumerate(monos):
            for j, (p2, q2) in enumerate(monos):
                if p1 + q1 + p2 + q2 <= order:
                    left.append(i)
                    right.append(j)
                    target.append(self.index[(p1 + p2, q1 + q2)])
        self.left = np.array(left)
        self.right = np.array(right)
        scatter = np.zeros((self.size, len(left)))
        scatter[target, np.arange(len(left))] = 1.0
        self.scatter = scatter
        self.conj_perm = np.array([self.index[(q, p)] for (p, q) in monos])


@lru_cache(maxsize=None)
def _tables(order):
    return _Tables(order)


@lru_cache(maxsize=None)
def _derivative_map(order, wrt_bar):
    """Source indices and factors turning an order-K jet into its derivative."""
    src_tab, dst_tab = _tables(order), _tables(order - 1)
    src, fac = [], []
    for (p, q) in dst_tab.monos:
        if wrt_bar:
            src.append(src_tab.index[(p, q + 1)])
            fac.append(q + 1)
        else:
            src.append(src_tab.index[(p + 1, q)])
            fac.append(p + 1)
    return np.array(src), np.array(fac, dtype=float)


def _size(order):
    return (order + 1) * (order + 2) // 2


class Jet:
    """Matrix-valued truncated Taylor polynomial in ``(dz, dzbar)``."""

    __slots__ = ("coeffs", "order")
    __array_priority__ = 100

    def __init__(self, coeffs, order):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim != 3 or coeffs.shape[0] != _size(order):
            raise DomainError("jet coefficient array has the wrong shape")
        self.coeffs = coeffs
        self.order = order

    # construction
    @classmethod
    def constant(cls, matrix, order):
        m = np.atleast_2d(np.asarray(matrix, dtype=complex))
        c = np.zeros((_size(order),) + m.shape, dtype=complex)
        c[0] = m
        return cls(c, order)

    @classmethod
    def eye(cls, n, order):
        return cls.constant(np.eye(n), order)

    @classmethod
    def from_holomorphic(cls, taylor):
        """From coefficients ``taylor[p]`` of ``(z - z0)**p`` (shape ``(K+1, a, b)``)."""
        taylor = np.asarray(taylor, dtype=complex)
        order = taylor.shape[0] - 1
        tab = _tables(order)
        c = np.zeros((tab.size,) + taylor.shape[1:], dtype=complex)
        for p in range(order + 1):
            c[tab.index[(p, 0)]] = taylor[p]
        return cls(c, order)

    @classmethod
    def from_monomials(cls, func, shape, order):
        """``func(p, q)`` returns the coefficient matrix of ``dz**p dzbar**q``."""
        tab = _tables(order)
        c = np.zeros((tab.size,) + tuple(shape), dtype=complex)
        for i, (p, q) in enumerate(tab.monos):
            c[i] = func(p, q)
        return cls(c, order)

    # basic views
    @property
    def shape(self):
        return self.coeffs.shape[1:]

    @property
    def value(self):
        return self.coeffs[0]

    def coefficient(self, p, q=0):
        return self.coeffs[_tables(self.order).index[(p, q)]]

    def truncate(self, order):
        if order > self.order:
            raise DomainError(f"jet of order {self.order} cannot supply order {order}")
        if order == self.order:
            return self
        return Jet(self.coeffs[: _size(order)], order)

    def __getitem__(self, key):
        if not isinstance(key, tuple):
            key = (key, slice(None))
        rows, cols = key
        return Jet(self.coeffs[:, rows, cols].reshape((self.coeffs.shape[0],) + _kept_shape(self.shape, rows, cols)), self.order)

    @property
    def T(self):
        return Jet(np.swapaxes(self.coeffs, 1, 2), self.order)

    def conj(self):
        perm = _tables(self.order).conj_perm
        return Jet(self.coeffs[perm].conj(), self.order)

    @property
    def H(self):
        return self.conj().T

    # arithmetic
    def _align(self, other):
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.coeffs + b.coeffs, a.order)
        out = self.coeffs.copy()
        out[0] = out[0] + other
        return Jet(out, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        if isinstance(scalar, Jet):
            raise TypeError("use @ for jet products")
        return Jet(self.coeffs * scalar, self.order)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            tab = _tables(a.order)
            prods = a.coeffs[tab.left] @ b.coeffs[tab.right]
            return Jet(np.tensordot(tab.scatter, prods, axes=1), a.order)
        return Jet(self.coeffs @ np.asarray(other, dtype=complex), self.order)

    def __rmatmul__(self, other):
        return Jet(np.asarray(other, dtype=complex) @ self.coeffs, self.order)

    def inv(self):
        """Inverse of a square jet by Newton iteration."""
        x = Jet.constant(np.linalg.inv(self.value), self.order)
        if self.order == 0:
            return x
        two = 2.0 * np.eye(self.shape[0])
        for _ in range(max(1, math.ceil(math.log2(self.order + 1))) + 1):
            x = x @ (two - self @ x)
        return x

    def dz(self):
        if self.order == 0:
            raise DomainError("cannot differentiate an order-0 jet")
        src, fac = _derivative_map(self.order, False)
        return Jet(self.coeffs[src] * fac[:, None, None], self.order - 1)

    def dzbar(self):
        if self.order == 0:
            raise DomainError("cannot differentiate an order-0 jet")
        src, fac = _derivative_map(self.order, True)
        return Jet(self.coeffs[src] * fac[:, None, None], self.order - 1)

    def evaluate(self, dz):
        """Evaluate the Taylor polynomial at the displacement ``dz``."""
        tab = _tables(self.order)
        w = np.array([dz**p * np.conj(dz) ** q for (p, q) in tab.monos])
        return np.tensordot(w, self.coeffs, axes=1)

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order})"


def _kept_shape(shape, rows, cols):
    r = np.empty(shape[0])[rows]
    c = np.empty(shape[1])[cols]
    return (np.atleast_1d(r).size, np.atleast_1d(c).size)


def hstack(jets):
    k = min(j.order for j in jets)
    return Jet(np.concatenate([j.truncate(k).coeffs for j in jets], axis=2), k)


def vstack(jets):
    k = min(j.order for j in jets)
    return Jet(np.concatenate([j.truncate(k).coeffs for j in jets], axis=1), k)


def power(jet, k):
    out = Jet.eye(jet.shape[0], jet.order)
    for _ in range(k):
        out = out @ jet
    return out
