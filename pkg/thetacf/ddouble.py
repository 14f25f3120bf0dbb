"""Vectorised double-double arithmetic on numpy arrays.

A value is a pair (hi, lo) of float64 arrays with hi + lo exact and
|lo| ≤ ½ ulp(hi), about 106 significant bits. numpy has no fused
multiply-add, so products use Dekker splitting.
"""
from __future__ import annotations

import mpmath
import numpy as np

from .numerics import SurdNumber, to_float

DDArray = tuple[np.ndarray, np.ndarray]

# 2^27 + 1
_SPLITTER = 134217729.0
# bits used when rounding an exact value to a (hi, lo) pair
_FROM_EXACT_BITS = 160


def _split(a: np.ndarray) -> DDArray:
    c = _SPLITTER * a
    big = c - a
    hi = c - big
    return hi, a - hi


def two_sum(a: np.ndarray, b: np.ndarray) -> DDArray:
    """s + err == a + b exactly."""
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def quick_two_sum(a: np.ndarray, b: np.ndarray) -> DDArray:
    """Same as :func:`two_sum` for |a| ≥ |b|."""
    s = a + b
    return s, b - (s - a)


def two_prod(a: np.ndarray, b: np.ndarray) -> DDArray:
    """p + err == a·b exactly."""
    p = a * b
    a_hi, a_lo = _split(a)
    b_hi, b_lo = _split(b)
    err = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, err


def dd_add(a_hi, a_lo, b_hi, b_lo) -> DDArray:
    s, e = two_sum(a_hi, b_hi)
    t, f = two_sum(a_lo, b_lo)
    s, e = quick_two_sum(s, e + t)
    return quick_two_sum(s, e + f)


def dd_sub(a_hi, a_lo, b_hi, b_lo) -> DDArray:
    return dd_add(a_hi, a_lo, -b_hi, -b_lo)


def dd_mul(a_hi, a_lo, b_hi, b_lo) -> DDArray:
    p, e = two_prod(a_hi, b_hi)
    e = e + (a_hi * b_lo + a_lo * b_hi)
    return quick_two_sum(p, e)


def dd_div(a_hi, a_lo, b_hi, b_lo) -> DDArray:
    """Long division: q1 = a/b in float64, then one correction from the dd remainder."""
    q1 = a_hi / b_hi
    p_hi, p_lo = dd_mul(b_hi, b_lo, q1, np.zeros_like(q1))
    r_hi, r_lo = dd_sub(a_hi, a_lo, p_hi, p_lo)
    q2 = (r_hi + r_lo) / b_hi
    return quick_two_sum(q1, q2)


def dd_less(a_hi, a_lo, b_hi, b_lo) -> np.ndarray:
    return (a_hi < b_hi) | ((a_hi == b_hi) & (a_lo < b_lo))


def dd_floor(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """⌊hi + lo⌋ as float64; exact while the value stays below 2^53."""
    k = np.floor(hi)
    return k - ((k == hi) & (lo < 0))


def dd_from_surd(x: SurdNumber) -> tuple[float, float]:
    value = to_float(x, _FROM_EXACT_BITS)
    with mpmath.workprec(_FROM_EXACT_BITS):
        hi = float(value)
        lo = float(value - hi)
    return hi, lo


def dd_to_mpf(hi: float, lo: float) -> mpmath.mpf:
    with mpmath.workprec(_FROM_EXACT_BITS):
        return mpmath.mpf(hi) + mpmath.mpf(lo)
