"""Second-order forward-mode differentiation over arrays.

A :class:`Jet` carries, for every element of a grid of shape ``G``, the value,
gradient (``G + (k,)``) and Hessian (``G + (k, k)``) with respect to ``k``
parameters. Model code is written once with the ``exp``/``log``/... helpers
below and runs on plain arrays (values only) or on jets.
"""
from __future__ import annotations

import numpy as np


class Jet:
    __slots__ = ("v", "g", "h")
    __array_priority__ = 100

    def __init__(self, v, g, h):
        self.v = v
        self.g = g
        self.h = h

    @classmethod
    def variables(cls, x):
        """One jet per coordinate of ``x`` (scalar jets, seeded with unit gradients)."""
        x = np.asarray(x, dtype=float)
        k = x.size
        eye = np.eye(k)
        zero = np.zeros((k, k))
        return [cls(np.float64(x[i]), eye[i], zero) for i in range(k)]

    @property
    def k(self):
        return self.g.shape[-1]

    # chain rule for a scalar function with derivatives d1, d2 evaluated at v
    def _apply(self, f, d1, d2):
        d1e = np.asarray(d1)[..., None]
        g = d1e * self.g
        h = np.asarray(d1)[..., None, None] * self.h + np.asarray(d2)[..., None, None] * (
            self.g[..., :, None] * self.g[..., None, :]
        )
        return Jet(f, g, h)

    def __neg__(self):
        return Jet(-self.v, -self.g, -self.h)

    def __add__(self, o):
        if isinstance(o, Jet):
            return Jet(self.v + o.v, self.g + o.g, self.h + o.h)
        o = np.asarray(o)
        v = self.v + o
        return Jet(v, np.broadcast_to(self.g, np.shape(v) + (self.k,)), np.broadcast_to(self.h, np.shape(v) + (self.k, self.k)))

    __radd__ = __add__

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, Jet):
            v = self.v * o.v
            g = self.g * np.asarray(o.v)[..., None] + o.g * np.asarray(self.v)[..., None]
            cross = self.g[..., :, None] * o.g[..., None, :]
            h = (
                self.h * np.asarray(o.v)[..., None, None]
                + o.h * np.asarray(self.v)[..., None, None]
                + cross
                + np.swapaxes(cross, -1, -2)
            )
            return Jet(v, g, h)
        o = np.asarray(o)
        return Jet(self.v * o, self.g * o[..., None], self.h * o[..., None, None])

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.v
        return self._apply(inv, -(inv**2), 2.0 * inv**3)

    def __truediv__(self, o):
        if isinstance(o, Jet):
            return self * o.reciprocal()
        return self * (1.0 / np.asarray(o))

    def __rtruediv__(self, o):
        return self.reciprocal() * o

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(p * log(self))
        v = self.v
        return self._apply(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def sum(self, axis=None):
        if axis is None:
            axes = tuple(range(np.ndim(self.v)))
        else:
            axes = (axis,) if np.isscalar(axis) else tuple(axis)
        axes = tuple(a % max(np.ndim(self.v), 1) for a in axes)
        return Jet(np.sum(self.v, axis=axes), np.sum(self.g, axis=axes), np.sum(self.h, axis=axes))


def _unary(x, f, d1, d2):
    return x._apply(f, d1, d2)


def exp(x):
    if isinstance(x, Jet):
        e = np.exp(x.v)
        return _unary(x, e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet):
        return _unary(x, np.log(x.v), 1.0 / x.v, -1.0 / x.v**2)
    return np.log(x)


def _inv1pexp_parts(z):
    # w = 1/(1 + e^z) and 1 - w, both without overflow
    z = np.asarray(z, dtype=float)
    w = np.exp(-np.logaddexp(0.0, z))
    wc = np.exp(-np.logaddexp(0.0, -z))
    return w, wc


def inv1pexp(x):
    """``1/(1 + e^x)``; derivatives stay bounded for large ``|x|``."""
    w, wc = _inv1pexp_parts(value(x))
    if isinstance(x, Jet):
        d1 = -w * wc
        return _unary(x, w, d1, -(wc - w) * d1)
    return w


def value(x):
    return x.v if isinstance(x, Jet) else x


def where(cond, a, b):
    """Elementwise select between two jets (or arrays) of matching grid shape."""
    if not isinstance(a, Jet) and not isinstance(b, Jet):
        return np.where(cond, a, b)
    c = np.asarray(cond)
    return Jet(
        np.where(c, value(a), value(b)),
        np.where(c[..., None], a.g, b.g),
        np.where(c[..., None, None], a.h, b.h),
    )


def stack_scalars(jets, shape):
    """Broadcast a scalar jet to a grid shape."""
    return jets + np.zeros(shape)


_TAYLOR_TERMS = 24


def _exprel_derivs(x):
    """``phi(x) = (e^x - 1)/x`` and its first two derivatives, accurate through ``x = 0``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 0.5
    phi = np.empty_like(x)
    d1 = np.empty_like(x)
    d2 = np.empty_like(x)
    if np.any(small):
        xs = x[small]
        p0 = np.zeros_like(xs)
        p1 = np.zeros_like(xs)
        p2 = np.zeros_like(xs)
        fact = 1.0
        for j in range(_TAYLOR_TERMS):
            fact *= j + 1  # (j+1)!
            c = 1.0 / fact
            p0 += c * xs**j
            if j >= 1:
                p1 += c * j * xs ** (j - 1)
            if j >= 2:
                p2 += c * j * (j - 1) * xs ** (j - 2)
        phi[small], d1[small], d2[small] = p0, p1, p2
    big = ~small
    if np.any(big):
        xb = x[big]
        e = np.exp(xb)
        em1 = np.expm1(xb)
        phi[big] = em1 / xb
        d1[big] = (xb * e - em1) / xb**2
        d2[big] = (xb**2 * e - 2.0 * xb * e + 2.0 * em1) / xb**3
    return phi, d1, d2


def exprel(x):
    """``(e^x - 1)/x`` with the removable singularity at 0 filled in."""
    if isinstance(x, Jet):
        phi, d1, d2 = _exprel_derivs(x.v)
        return x._apply(phi, d1, d2)
    phi, _, _ = _exprel_derivs(x)
    return phi
