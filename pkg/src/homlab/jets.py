"""Truncated Taylor series ("jets") for exact high-order derivatives of curves.

A :class:`Jet` stores ``c[j] = f^(j)(u0) / j!`` for ``j = 0..K`` over an array of
expansion points.  Arithmetic follows the usual Taylor-mode recurrences, so
derivatives of order 8 of a composite expression cost ``O(K^2)`` per point
instead of an expression swell.
"""

from __future__ import annotations

import math

import numpy as np


class Jet:
    __array_priority__ = 1000

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @classmethod
    def variable(cls, u, order: int) -> "Jet":
        u = np.asarray(u, dtype=float)
        c = np.zeros((order + 1,) + u.shape)
        c[0] = u
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        c = np.zeros_like(self.c)
        c[0] = other
        return Jet(c)

    def derivative(self, k: int) -> np.ndarray:
        return math.factorial(k) * self.c[k]

    def __add__(self, other):
        return Jet(self.c + self._lift(other).c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c)

    def __sub__(self, other):
        return Jet(self.c - self._lift(other).c)

    def __rsub__(self, other):
        return Jet(self._lift(other).c - self.c)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * other)
        return Jet(_cauchy(self.c, other.c))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c / other)
        a, b = self.c, other.c
        q = np.zeros(np.broadcast_shapes(a.shape, b.shape))
        for n in range(q.shape[0]):
            acc = a[n] - sum(b[j] * q[n - j] for j in range(1, n + 1))
            q[n] = acc / b[0]
        return Jet(q)

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def __pow__(self, alpha):
        if isinstance(alpha, (int, np.integer)) and alpha >= 0:
            out = self._lift(1.0)
            base = self
            k = int(alpha)
            while k:
                if k & 1:
                    out = out * base
                base = base * base
                k >>= 1
            return out
        return _real_power(self, float(alpha))


def _cauchy(a, b):
    K = a.shape[0]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for n in range(K):
        out[n] = sum(a[j] * b[n - j] for j in range(n + 1))
    return out


def _real_power(x: Jet, alpha: float) -> Jet:
    a = x.c
    if np.any(a[0] <= 0):
        raise ValueError("real powers of jets need a positive constant term")
    p = np.zeros_like(a)
    p[0] = a[0] ** alpha
    for n in range(1, a.shape[0]):
        acc = sum((alpha * j - (n - j)) * a[j] * p[n - j] for j in range(1, n + 1))
        p[n] = acc / (n * a[0])
    return Jet(p)


def _sincos(x: Jet):
    a = x.c
    s = np.zeros_like(a)
    c = np.zeros_like(a)
    s[0], c[0] = np.sin(a[0]), np.cos(a[0])
    for n in range(1, a.shape[0]):
        s[n] = sum(j * a[j] * c[n - j] for j in range(1, n + 1)) / n
        c[n] = -sum(j * a[j] * s[n - j] for j in range(1, n + 1)) / n
    return Jet(s), Jet(c)


def sin(x):
    return _sincos(x)[0] if isinstance(x, Jet) else np.sin(x)


def cos(x):
    return _sincos(x)[1] if isinstance(x, Jet) else np.cos(x)


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    a = x.c
    e = np.zeros_like(a)
    e[0] = np.exp(a[0])
    for n in range(1, a.shape[0]):
        e[n] = sum(j * a[j] * e[n - j] for j in range(1, n + 1)) / n
    return Jet(e)


def sqrt(x):
    return x ** 0.5 if isinstance(x, Jet) else np.sqrt(x)


def power(x, alpha):
    return x ** alpha


def compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Coefficients of ``F(G(sigma))`` where ``outer`` holds ``F`` and ``inner`` holds ``G`` with ``G_0 = 0``."""
    K = outer.shape[0]
    out = np.zeros(np.broadcast_shapes(outer.shape, inner.shape))
    out[0] = outer[0]
    power_c = np.zeros_like(out)
    power_c[0] = 1.0
    for j in range(1, K):
        power_c = _cauchy(power_c, inner)
        out = out + outer[j] * power_c
    return out


def revert(series: np.ndarray) -> np.ndarray:
    """Compositional inverse of ``S`` with ``S_0 = 0`` and ``S_1 != 0``."""
    K = series.shape[0]
    b = np.zeros_like(series)
    if K > 1:
        b[1] = 1.0 / series[1]
    for n in range(2, K):
        comp = compose(series, b)
        b[n] = -comp[n] / series[1]
    return b
