"""Truncated multivariate Taylor algebra.

A `Jet` stores the Taylor coefficients of a scalar field around a point,
for every monomial of total degree <= order in `nvars` variables.  The
coefficient array has shape (ncoef, *batch) so one jet can carry many
base points at once; all arithmetic is vectorised over the batch axes.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import DomainError


@lru_cache(maxsize=None)
def monomials(nvars: int, order: int) -> tuple:
    """Multi-indices sorted by total degree, so truncation is a prefix slice."""
    out = []
    for deg in range(order + 1):
        out.extend(_of_degree(nvars, deg))
    return tuple(out)


def _of_degree(nvars, deg):
    if nvars == 1:
        return [(deg,)]
    res = []
    for first in range(deg, -1, -1):
        for rest in _of_degree(nvars - 1, deg - first):
            res.append((first,) + rest)
    return res


@lru_cache(maxsize=None)
def _layout(nvars, order):
    monos = monomials(nvars, order)
    index = {m: i for i, m in enumerate(monos)}
    pairs = []
    for k, gamma in enumerate(monos):
        for i, alpha in enumerate(monos):
            beta = tuple(g - a for g, a in zip(gamma, alpha))
            if min(beta) >= 0:
                pairs.append((k, i, index[beta]))
    pairs.sort()
    ks = np.array([p[0] for p in pairs])
    left = np.array([p[1] for p in pairs])
    right = np.array([p[2] for p in pairs])
    starts = np.searchsorted(ks, np.arange(len(monos)))
    factorials = np.array([math.prod(math.factorial(a) for a in m) for m in monos], dtype=float)
    return monos, index, left, right, starts, factorials


@lru_cache(maxsize=None)
def _deriv_layout(nvars, order, axis):
    """Source slots and factors for d/dx_axis, mapping order -> order-1."""
    src_index = _layout(nvars, order)[1]
    target = monomials(nvars, order - 1)
    src = []
    fac = []
    for beta in target:
        alpha = list(beta)
        alpha[axis] += 1
        src.append(src_index[tuple(alpha)])
        fac.append(beta[axis] + 1.0)
    return np.array(src), np.array(fac)


def ncoef(nvars: int, order: int) -> int:
    return math.comb(nvars + order, order)


class Jet:
    """Taylor coefficients of a scalar field up to a fixed total order."""

    __slots__ = ("c", "nvars", "order")
    __array_priority__ = 100.0

    def __init__(self, coeffs, nvars: int, order: int):
        self.c = coeffs
        self.nvars = nvars
        self.order = order

    # ---------- construction ----------
    @classmethod
    def constant(cls, value, nvars, order):
        value = np.asarray(value, dtype=float)
        c = np.zeros((ncoef(nvars, order),) + value.shape)
        c[0] = value
        return cls(c, nvars, order)

    @classmethod
    def variable(cls, value, axis, nvars, order):
        """The coordinate function x_axis expanded around `value`."""
        jet = cls.constant(value, nvars, order)
        if order >= 1:
            jet.c[1 + axis] = 1.0
        return jet

    # ---------- accessors ----------
    @property
    def value(self):
        return self.c[0]

    @property
    def batch_shape(self):
        return self.c.shape[1:]

    def coefficient(self, alpha):
        return self.c[_layout(self.nvars, self.order)[1][tuple(alpha)]]

    def derivative(self, alpha):
        """Partial derivative for multi-index alpha (counts per variable)."""
        alpha = tuple(alpha)
        if sum(alpha) > self.order:
            raise ValueError(f"derivative {alpha} exceeds jet order {self.order}")
        fac = math.prod(math.factorial(a) for a in alpha)
        return self.coefficient(alpha) * fac

    def partial(self, *axes):
        """Partial derivative along the listed axes, in any order."""
        alpha = [0] * self.nvars
        for a in axes:
            alpha[a] += 1
        return self.derivative(alpha)

    def derivatives(self):
        """Dict from multi-index to derivative value."""
        monos, _, _, _, _, fact = _layout(self.nvars, self.order)
        return {m: self.c[i] * fact[i] for i, m in enumerate(monos)}

    def d(self, axis):
        """Jet of the partial derivative along `axis` (one order lower)."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        src, fac = _deriv_layout(self.nvars, self.order, axis)
        fac = fac.reshape((-1,) + (1,) * (self.c.ndim - 1))
        return Jet(self.c[src] * fac, self.nvars, self.order - 1)

    def truncate(self, order):
        if order >= self.order:
            return self
        return Jet(self.c[: ncoef(self.nvars, order)], self.nvars, order)

    def nilpotent(self):
        c = self.c.copy()
        c[0] = 0.0
        return Jet(c, self.nvars, self.order)

    # ---------- arithmetic ----------
    def _match(self, other):
        if isinstance(other, Jet):
            if other.nvars != self.nvars:
                raise ValueError("jets over different variable sets")
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        return self, None

    def __add__(self, other):
        a, b = self._match(other)
        if b is None:
            other = np.asarray(other, dtype=float)
            shape = np.broadcast_shapes(a.c.shape[1:], other.shape)
            c = np.broadcast_to(a.c, a.c.shape[:1] + shape).copy()
            c[0] += other
            return Jet(c, a.nvars, a.order)
        return Jet(a.c + b.c, a.nvars, a.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.nvars, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._match(other)
        if b is None:
            return Jet(a.c * np.asarray(other, dtype=float), a.nvars, a.order)
        _, _, left, right, starts, _ = _layout(a.nvars, a.order)
        prod = a.c[left] * b.c[right]
        return Jet(np.add.reduceat(prod, starts, axis=0), a.nvars, a.order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return Jet(self.c / np.asarray(other, dtype=float), self.nvars, self.order)

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("Jet powers take integer exponents; use exp/log otherwise")
        return int_power(self, int(n))

    def __repr__(self):
        return f"Jet(nvars={self.nvars}, order={self.order}, batch={self.batch_shape})"


def compose_series(a: Jet, coeffs) -> Jet:
    """Evaluate sum_j coeffs[j] * (a - a0)^j by Horner's rule."""
    h = a.nilpotent()
    out = Jet.constant(coeffs[a.order], a.nvars, a.order)
    for j in range(a.order - 1, -1, -1):
        out = out * h
        out.c[0] = out.c[0] + coeffs[j]
    return out


def int_power(a, n: int):
    if not isinstance(a, Jet):
        return np.asarray(a, dtype=float) ** n
    if n < 0:
        return reciprocal(int_power(a, -n))
    result = Jet.constant(np.ones(a.batch_shape), a.nvars, a.order)
    base = a
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def _check_nonzero(x, what):
    if np.any(x == 0.0):
        raise DomainError(f"{what} of zero")


def reciprocal(a):
    if not isinstance(a, Jet):
        x = np.asarray(a, dtype=float)
        _check_nonzero(x, "reciprocal")
        return 1.0 / x
    x0 = a.value
    _check_nonzero(x0, "reciprocal")
    inv = 1.0 / x0
    coeffs = [inv]
    for _ in range(a.order):
        coeffs.append(-coeffs[-1] * inv)
    return compose_series(a, coeffs)


def exp(a):
    if not isinstance(a, Jet):
        return np.exp(a)
    e = np.exp(a.value)
    return compose_series(a, [e / math.factorial(j) for j in range(a.order + 1)])


def sin(a):
    if not isinstance(a, Jet):
        return np.sin(a)
    x0 = a.value
    s, c = np.sin(x0), np.cos(x0)
    cycle = [s, c, -s, -c]
    return compose_series(a, [cycle[j % 4] / math.factorial(j) for j in range(a.order + 1)])


def cos(a):
    if not isinstance(a, Jet):
        return np.cos(a)
    x0 = a.value
    s, c = np.sin(x0), np.cos(x0)
    cycle = [c, -s, -c, s]
    return compose_series(a, [cycle[j % 4] / math.factorial(j) for j in range(a.order + 1)])


def log(a):
    x0 = a.value if isinstance(a, Jet) else np.asarray(a, dtype=float)
    if np.any(x0 <= 0.0):
        raise DomainError("log of a non-positive value")
    if not isinstance(a, Jet):
        return np.log(x0)
    inv = 1.0 / x0
    coeffs = [np.log(x0)]
    p = np.ones_like(x0)
    for j in range(1, a.order + 1):
        p = p * inv
        coeffs.append((-1.0) ** (j + 1) * p / j)
    return compose_series(a, coeffs)


def sqrt(a):
    x0 = a.value if isinstance(a, Jet) else np.asarray(a, dtype=float)
    if not isinstance(a, Jet):
        if np.any(x0 < 0.0):
            raise DomainError("sqrt of a negative value")
        return np.sqrt(x0)
    if np.any(x0 <= 0.0):
        raise DomainError("sqrt of a non-positive value")
    root = np.sqrt(x0)
    coeffs = [root]
    binom = 1.0
    p = root
    for j in range(1, a.order + 1):
        binom *= (0.5 - (j - 1)) / j
        p = p / x0
        coeffs.append(binom * p)
    return compose_series(a, coeffs)


def atan(a):
    if not isinstance(a, Jet):
        return np.arctan(a)
    x0 = a.value
    # series of 1/(1+(x0+t)^2) by the recurrence for a quadratic denominator
    q0, q1 = 1.0 + x0 * x0, 2.0 * x0
    r = [1.0 / q0]
    for n in range(1, a.order):
        prev2 = r[n - 2] if n >= 2 else 0.0
        r.append(-(q1 * r[n - 1] + prev2) / q0)
    coeffs = [np.arctan(x0)] + [r[j - 1] / j for j in range(1, a.order + 1)]
    return compose_series(a, coeffs)


def value_of(a):
    return a.value if isinstance(a, Jet) else a


def scalar(x) -> float:
    """The single entry of a one-point batch as a float."""
    return float(np.asarray(value_of(x)).reshape(-1)[0])


def variables(point, order, nvars=None):
    """Coordinate jets for a base point given as a sequence of arrays."""
    nvars = len(point) if nvars is None else nvars
    return [Jet.variable(p, i, nvars, order) for i, p in enumerate(point)]


def compose(coeff_jet: Jet, increments) -> Jet:
    """Substitute jets with zero constant term into a Taylor polynomial.

    `coeff_jet` is a jet in len(increments) variables (the outer field),
    `increments` are jets of the inner map minus its base value.  Batch
    axes of both must broadcast.
    """
    inner = increments[0]
    monos = monomials(coeff_jet.nvars, coeff_jet.order)
    powers = {}
    total = None
    for i, alpha in enumerate(monos):
        term = _mono_power(alpha, increments, powers, inner)
        piece = term * coeff_jet.c[i] if term is not None else None
        if piece is None:
            piece = Jet.constant(coeff_jet.c[i], inner.nvars, inner.order)
        total = piece if total is None else total + piece
    return total


def _mono_power(alpha, increments, cache, inner):
    if sum(alpha) == 0:
        return None
    if alpha in cache:
        return cache[alpha]
    axis = next(i for i, a in enumerate(alpha) if a > 0)
    lower = list(alpha)
    lower[axis] -= 1
    lower = tuple(lower)
    prev = _mono_power(lower, increments, cache, inner)
    result = increments[axis] if prev is None else prev * increments[axis]
    cache[alpha] = result
    return result
