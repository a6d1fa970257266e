"""Small numerical kernels: cancellation-safe hyperbolics and compensated sums."""
from __future__ import annotations

import math

import numpy as np

SMALL_ARG = 1e-4


def sinh_safe(u):
    """sinh(u) with a Taylor branch for |u| < 1e-4 (elementwise)."""
    u = np.asarray(u, dtype=float)
    out = np.sinh(u)
    small = np.abs(u) < SMALL_ARG
    if np.any(small):
        us = u[small]
        u2 = us * us
        out[small] = us * (1.0 + u2 / 6.0 * (1.0 + u2 / 20.0))
    return out


def cosh_minus_one(x):
    """cosh(x) - 1 without cancellation, as 2 sinh(x/2)**2."""
    s = sinh_safe(np.asarray(x, dtype=float) / 2.0)
    return 2.0 * s * s


def two_sum(a, b):
    """Error-free transformation: a + b == s + e exactly (Knuth)."""
    s = a + b
    bp = s - a
    ap = s - bp
    e = (a - ap) + (b - bp)
    return s, e


class NeumaierAccumulator:
    """Elementwise compensated accumulator over numpy arrays.

    Keeps a running sum and a running correction per element; ``value``
    returns ``sum + correction``.
    """

    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, terms, where=slice(None)):
        s = self.s[where]
        t, e = two_sum(s, terms)
        self.s[where] = t
        self.c[where] += e

    @property
    def value(self):
        return self.s + self.c


def fsum(values) -> float:
    """Correctly rounded sum of an array or iterable."""
    if isinstance(values, np.ndarray):
        values = values.tolist()
    return math.fsum(values)
