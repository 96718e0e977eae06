"""Numerically stable integrals of exponentials on [0, T].

All helpers stay finite when two rates coincide and never form e^{+r T}.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammainc

# below this |h| * T the divided difference switches to a Taylor expansion
_DD_SWITCH = 1e-3
# below this r * T the exponential integrals switch to their power series
_SMALL = 1e-6


def moment(k: int, r: float, T: float) -> float:
    """``int_0^T t^k e^{-r t} dt`` for ``r >= 0``."""
    if r < 0:
        raise ValueError("rate must be non-negative")
    x = r * T
    if x < _SMALL:
        return T ** (k + 1) * (1 / (k + 1) - x / (k + 2) + x * x / (2 * (k + 3)))
    return math.factorial(k) / r ** (k + 1) * float(gammainc(k + 1, r * T))


def pexp(r: float, T: float) -> float:
    """``int_0^T e^{-r t} dt``; continuous at ``r = 0``."""
    x = r * T
    if abs(x) < _SMALL:
        return T * (1 - x / 2 + x * x / 6)
    return -math.expm1(-x) / r


def divdiff(u: float, v: float, T: float) -> float:
    """``(P(u) - P(v)) / (v - u)`` where ``P = pexp(., T)``; ``u, v >= 0``."""
    h = v - u
    if abs(h) * T > _DD_SWITCH:
        return (pexp(u, T) - pexp(v, T)) / h
    m = 0.5 * (u + v)
    return moment(1, m, T) + moment(3, m, T) * h * h / 24.0


def expdiff(a: float, b: float, t):
    """``(e^{-a t} - e^{-b t}) / (b - a)`` for ``a, b >= 0``, vectorised in ``t``.

    Equals ``t e^{-a t}`` when ``a == b``.
    """
    t = np.asarray(t, dtype=float)
    lo, d = min(a, b), abs(b - a)
    if d == 0.0:
        return t * np.exp(-lo * t)
    x = d * t
    small = x < _SMALL
    ratio = np.where(small, t * (1 - x / 2 + x * x / 6),
                     -np.expm1(-x) / d)
    return np.exp(-lo * t) * ratio
