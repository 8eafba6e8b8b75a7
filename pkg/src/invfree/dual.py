"""Forward-mode dual numbers carrying a full gradient.

``val`` may be a float or an ndarray (batched evaluation over many points);
``grad`` has shape ``(n,) + shape(val)``.
"""
from __future__ import annotations

import numpy as np


class Dual:
    __slots__ = ("val", "grad")

    def __init__(self, val, grad):
        self.val = val
        self.grad = grad

    @classmethod
    def variable(cls, val, index: int, n: int) -> "Dual":
        val = np.asarray(val, dtype=float)
        grad = np.zeros((n,) + val.shape)
        grad[index] = 1.0
        return cls(val, grad)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.grad!r})"

    def __neg__(self):
        return Dual(-self.val, -self.grad)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.grad + other.grad)
        return Dual(self.val + other, self.grad)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.grad - other.grad)
        return Dual(self.val - other, self.grad)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.grad)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.grad * other.val + other.grad * self.val)
        return Dual(self.val * other, self.grad * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.val / other.val
            return Dual(q, (self.grad - other.grad * q) / other.val)
        return Dual(self.val / other, self.grad / other)

    def __rtruediv__(self, other):
        q = other / self.val
        return Dual(q, -self.grad * (q / self.val))

    def __pow__(self, other):
        if isinstance(other, Dual):
            return exp(other * log(self))
        c = float(other)
        if c == 0.0:
            return Dual(np.ones_like(self.val) if np.ndim(self.val) else 1.0, self.grad * 0.0)
        return Dual(self.val ** c, self.grad * (c * self.val ** (c - 1.0)))

    def __rpow__(self, other):
        return exp(self * np.log(other))


def _chain(x: Dual, val, dval) -> Dual:
    return Dual(val, x.grad * dval)


def sin(x):
    if isinstance(x, Dual):
        return _chain(x, np.sin(x.val), np.cos(x.val))
    return np.sin(x)


def cos(x):
    if isinstance(x, Dual):
        return _chain(x, np.cos(x.val), -np.sin(x.val))
    return np.cos(x)


def exp(x):
    if isinstance(x, Dual):
        e = np.exp(x.val)
        return _chain(x, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return _chain(x, np.log(x.val), 1.0 / x.val)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = np.sqrt(x.val)
        return _chain(x, s, 0.5 / s)
    return np.sqrt(x)


def fabs(x):
    # derivative of |x| taken as sign(x), i.e. 0 at the kink
    if isinstance(x, Dual):
        return _chain(x, np.abs(x.val), np.sign(x.val))
    return np.abs(x)


FUNCTIONS = {
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "abs": fabs,
}
