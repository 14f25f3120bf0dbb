from __future__ import annotations

from fractions import Fraction

import mpmath
import numpy as np
import pytest

from thetacf.ddouble import dd_div, dd_floor, dd_from_surd, dd_less, dd_mul, dd_to_mpf, two_prod, two_sum
from thetacf.expansion import first_digit, gauss_map, gauss_map_dd
from thetacf.numerics import to_float


def test_two_sum_and_two_prod_are_exact():
    a = np.array([1.0, 0.1, 1e16, 3.0])
    b = np.array([1e-17, 0.2, 1.0, 1.0 / 3.0])
    s, e = two_sum(a, b)
    p, f = two_prod(a, b)
    for k in range(a.size):
        assert Fraction(s[k]) + Fraction(e[k]) == Fraction(a[k]) + Fraction(b[k])
        assert Fraction(p[k]) + Fraction(f[k]) == Fraction(a[k]) * Fraction(b[k])


def test_theta_round_trips_to_about_106_bits(ctx3):
    hi, lo = dd_from_surd(ctx3.theta)
    with mpmath.workprec(200):
        assert abs(dd_to_mpf(hi, lo) - to_float(ctx3.theta, 200)) <= mpmath.mpf(2) ** -106


def test_division_and_product(ctx2):
    th_hi, th_lo = dd_from_surd(ctx2.theta)
    hi, lo = (np.array([th_hi]), np.array([th_lo]))
    q_hi, q_lo = dd_div(np.ones(1), np.zeros(1), hi, lo)
    # 1/θ = √2
    with mpmath.workprec(200):
        assert abs(dd_to_mpf(q_hi[0], q_lo[0]) - mpmath.sqrt(2)) <= mpmath.mpf(2) ** -100
    p_hi, p_lo = dd_mul(q_hi, q_lo, hi, lo)
    assert abs((p_hi[0] - 1.0) + p_lo[0]) <= 2.0**-98


def test_floor_and_order_look_at_the_low_part():
    hi = np.array([3.0, 3.0, 2.5])
    lo = np.array([-1e-20, 1e-20, 0.0])
    assert list(dd_floor(hi, lo)) == [2.0, 3.0, 2.0]
    assert list(dd_less(hi, lo, np.full(3, 3.0), np.zeros(3))) == [True, False, True]


def test_gauss_map_dd_matches_exact_map(ctx):
    points = [ctx.theta * Fraction(k, 17) + Fraction(1, 10007) for k in range(1, 16)]
    points = [p for p in points if ctx.in_domain(p)]
    hi = np.array([float(to_float(p, 53)) for p in points])
    lo = np.array([float(to_float(p, 160) - mpmath.mpf(h)) for p, h in zip(points, hi)])
    out_hi, out_lo, digit = gauss_map_dd(hi, lo, ctx)
    for k, p in enumerate(points):
        image = gauss_map(p, ctx)
        assert digit[k] == first_digit(p, ctx)
        assert abs(out_hi[k] - float(to_float(image, 128))) <= 1e-15


def test_gauss_map_dd_at_zero(ctx2):
    out_hi, out_lo, digit = gauss_map_dd(np.array([0.0, 0.25]), np.zeros(2), ctx2)
    assert out_hi[0] == 0.0 and out_lo[0] == 0.0
    assert digit[0] == np.inf
    assert digit[1] == pytest.approx(np.floor(np.sqrt(2.0) / 0.25))
