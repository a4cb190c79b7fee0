"""Truncated Taylor jets: exact derivatives up to order three.

A :class:`Jet` carries the value of a scalar expression together with its
gradient, Hessian and (optionally) third-derivative tensor with respect to a
fixed set of input variables, for a batch of evaluation points.  Profiles are
written once as ordinary expressions over the functions in this module
(``sqrt``, ``sin``, ``arctan2`` ...) and can then be evaluated either on plain
numpy arrays (values only) or on jets (values plus analytic derivatives).

Shapes, for a batch of ``m`` points and ``n`` variables::

    v  (m,)   d1 (m, n)   d2 (m, n, n)   d3 (m, n, n, n) or None
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = [
    "Jet",
    "variables",
    "sqrt",
    "sin",
    "cos",
    "exp",
    "log",
    "tanh",
    "arctan",
    "arcsin",
    "arctan2",
    "norm",
    "where",
]


def _sym3(m2: np.ndarray, v1: np.ndarray) -> np.ndarray:
    """a_ij b_k + a_ik b_j + a_jk b_i."""
    return (
        np.einsum("mij,mk->mijk", m2, v1)
        + np.einsum("mik,mj->mijk", m2, v1)
        + np.einsum("mjk,mi->mijk", m2, v1)
    )


class Jet:
    __slots__ = ("v", "d1", "d2", "d3")
    __array_priority__ = 1000

    def __init__(self, v, d1, d2, d3=None):
        self.v = v
        self.d1 = d1
        self.d2 = d2
        self.d3 = d3

    @property
    def order(self) -> int:
        return 2 if self.d3 is None else 3

    @property
    def nvars(self) -> int:
        return self.d1.shape[-1]

    def _const(self, c) -> "Jet":
        c = np.broadcast_to(np.asarray(c, dtype=float), self.v.shape)
        m, n = self.d1.shape
        d3 = None if self.d3 is None else np.zeros((m, n, n, n))
        return Jet(c.copy(), np.zeros((m, n)), np.zeros((m, n, n)), d3)

    def _lift(self, other) -> "Jet":
        return other if isinstance(other, Jet) else self._const(other)

    # -- arithmetic ------------------------------------------------------
    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2, None if self.d3 is None else -self.d3)

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v + other, self.d1, self.d2, self.d3)
        d3 = None if self.d3 is None or other.d3 is None else self.d3 + other.d3
        return Jet(self.v + other.v, self.d1 + other.d1, self.d2 + other.d2, d3)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            if c.ndim == 0:
                d3 = None if self.d3 is None else self.d3 * c
                return Jet(self.v * c, self.d1 * c, self.d2 * c, d3)
            other = self._const(c)
        a, b = self, other
        v = a.v * b.v
        d1 = a.d1 * b.v[:, None] + a.v[:, None] * b.d1
        d2 = (
            a.d2 * b.v[:, None, None]
            + np.einsum("mi,mj->mij", a.d1, b.d1)
            + np.einsum("mi,mj->mij", b.d1, a.d1)
            + a.v[:, None, None] * b.d2
        )
        d3 = None
        if a.d3 is not None and b.d3 is not None:
            d3 = (
                a.d3 * b.v[:, None, None, None]
                + _sym3(a.d2, b.d1)
                + _sym3(b.d2, a.d1)
                + a.v[:, None, None, None] * b.d3
            )
        return Jet(v, d1, d2, d3)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, int) and p >= 0:
            if p == 0:
                return self._const(1.0)
            out = self
            for _ in range(p - 1):
                out = out * self
            return out
        p = float(p)
        v = self.v
        return self.chain(
            v**p,
            p * v ** (p - 1),
            p * (p - 1) * v ** (p - 2),
            p * (p - 1) * (p - 2) * v ** (p - 3),
        )

    def reciprocal(self):
        v = self.v
        return self.chain(1.0 / v, -1.0 / v**2, 2.0 / v**3, -6.0 / v**4)

    # -- composition -----------------------------------------------------
    def chain(self, f0, f1, f2, f3) -> "Jet":
        """Compose a scalar function with value/derivatives f0..f3 at ``self.v``."""
        g1, g2 = self.d1, self.d2
        d1 = f1[:, None] * g1
        d2 = f2[:, None, None] * np.einsum("mi,mj->mij", g1, g1) + f1[:, None, None] * g2
        d3 = None
        if self.d3 is not None:
            d3 = (
                f3[:, None, None, None] * np.einsum("mi,mj,mk->mijk", g1, g1, g1)
                + f2[:, None, None, None] * _sym3(g2, g1)
                + f1[:, None, None, None] * self.d3
            )
        return Jet(np.asarray(f0, dtype=float), d1, d2, d3)

    def __repr__(self) -> str:
        return f"Jet(m={self.v.shape[0]}, n={self.nvars}, order={self.order})"


def variables(X: np.ndarray, order: int = 2) -> list[Jet]:
    """Independent-variable jets for the columns of ``X`` (shape (m, n))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    eye = np.eye(n)
    out = []
    for i in range(n):
        d3 = np.zeros((m, n, n, n)) if order >= 3 else None
        out.append(Jet(X[:, i].copy(), np.tile(eye[i], (m, 1)), np.zeros((m, n, n)), d3))
    return out


def _unary(x, f0, f1, f2, f3):
    return x.chain(f0, f1, f2, f3)


def sqrt(x):
    if isinstance(x, Jet):
        return x**0.5
    return np.sqrt(x)


def sin(x):
    if isinstance(x, Jet):
        s, c = np.sin(x.v), np.cos(x.v)
        return _unary(x, s, c, -s, -c)
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        s, c = np.sin(x.v), np.cos(x.v)
        return _unary(x, c, -s, -c, s)
    return np.cos(x)


def exp(x):
    if isinstance(x, Jet):
        e = np.exp(x.v)
        return _unary(x, e, e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet):
        v = x.v
        return _unary(x, np.log(v), 1.0 / v, -1.0 / v**2, 2.0 / v**3)
    return np.log(x)


def tanh(x):
    if isinstance(x, Jet):
        t = np.tanh(x.v)
        s = 1.0 - t**2
        return _unary(x, t, s, -2.0 * t * s, s * (6.0 * t**2 - 2.0))
    return np.tanh(x)


def arctan(x):
    if isinstance(x, Jet):
        v = x.v
        q = 1.0 / (1.0 + v**2)
        return _unary(x, np.arctan(v), q, -2.0 * v * q**2, (6.0 * v**2 - 2.0) * q**3)
    return np.arctan(x)


def arcsin(x):
    if isinstance(x, Jet):
        v = x.v
        q = 1.0 - v**2
        return _unary(
            x,
            np.arcsin(v),
            q**-0.5,
            v * q**-1.5,
            (1.0 + 2.0 * v**2) * q**-2.5,
        )
    return np.arcsin(x)


def where(mask: np.ndarray, a: Jet, b: Jet) -> Jet:
    """Select jet components pointwise."""
    m = np.asarray(mask, dtype=bool)
    d3 = None
    if a.d3 is not None and b.d3 is not None:
        d3 = np.where(m[:, None, None, None], a.d3, b.d3)
    return Jet(
        np.where(m, a.v, b.v),
        np.where(m[:, None], a.d1, b.d1),
        np.where(m[:, None, None], a.d2, b.d2),
        d3,
    )


def arctan2(y, x):
    """Four-quadrant angle; derivatives are those of atan(y/x) where it exists."""
    if not isinstance(y, Jet) and not isinstance(x, Jet):
        return np.arctan2(y, x)
    ref = y if isinstance(y, Jet) else x
    y = ref._lift(y)
    x = ref._lift(x)
    use_x = np.abs(x.v) >= np.abs(y.v)
    # Guard the unused branch against division by zero.
    xs = Jet(np.where(use_x, x.v, 1.0), x.d1, x.d2, x.d3)
    ys = Jet(np.where(use_x, 1.0, y.v), y.d1, y.d2, y.d3)
    a = arctan(y / xs)
    b = -arctan(x / ys)
    out = where(use_x, a, b)
    out.v = np.arctan2(y.v, x.v)
    return out


def norm(xs: Sequence) -> object:
    """Euclidean norm of a sequence of components (jets or arrays)."""
    total = xs[0] * xs[0]
    for c in xs[1:]:
        total = total + c * c
    return sqrt(total)
