from __future__ import annotations

import math
import random
from fractions import Fraction

import mpmath
import pytest

from thetacf.errors import DomainError, ValidationError
from thetacf.numerics import (
    SurdNumber,
    ThetaContext,
    parse_surd,
    surd_add,
    surd_cmp,
    surd_floor,
    surd_inv,
    surd_mul,
    surd_neg,
    surd_sign,
    to_float,
)


def _random_surd(rnd: random.Random, m: int) -> SurdNumber:
    def q() -> Fraction:
        return Fraction(rnd.randint(-50, 50), rnd.randint(1, 30))

    return SurdNumber(q(), q(), m)


def test_inverse_of_one_is_one():
    assert surd_inv(SurdNumber(1, 0, 4)) == 1


def test_sqrt2_squared_is_two():
    root2 = SurdNumber(0, 1, 2)
    assert surd_mul(root2, root2) == 2


def test_inverse_of_one_plus_sqrt2():
    inv = surd_inv(SurdNumber(1, 1, 2))
    assert (inv.a, inv.b) == (-1, 1)


def test_inversion_of_zero_raises():
    with pytest.raises(DomainError):
        surd_inv(SurdNumber(0, 0, 3))


def test_square_m_is_folded_into_rational_part():
    x = SurdNumber(Fraction(10, 3), -1, 4)
    assert x.is_rational
    assert x == Fraction(4, 3)


@pytest.mark.parametrize(
    "x, expected",
    [
        (SurdNumber(Fraction(7, 2), 0, 5), 3),
        (SurdNumber(0, 1, 2), 1),
        (SurdNumber(Fraction(10, 3), -1, 4), 1),
        (SurdNumber(0, -1, 2), -2),
        (SurdNumber(3, -2, 2), 0),
    ],
)
def test_surd_floor_examples(x, expected):
    assert surd_floor(x) == expected
    assert math.floor(x) == expected


def test_surd_cmp_examples(ctx2, ctx4):
    assert surd_cmp(ctx2.theta, ctx2.theta) == 0
    assert surd_cmp(ctx2.surd(Fraction(1, 2)), ctx2.theta) < 0
    assert surd_cmp(ctx4.surd(Fraction(1, 3)), ctx4.theta) < 0


def test_to_float_examples(ctx2):
    assert to_float(SurdNumber(0, 1, 4), 53) == 2
    assert float(to_float(ctx2.theta, 53)) == 0.7071067811865476
    assert float(to_float(SurdNumber(Fraction(1, 3), 0, 7), 53)) == 1 / 3


def test_to_float_rejects_low_precision(ctx2):
    with pytest.raises(DomainError):
        to_float(ctx2.theta, 52)


def test_to_float_avoids_cancellation():
    # 1 + √2 − (1/(√2 − 1)) style: a and b√m nearly cancel
    x = SurdNumber(Fraction(665857, 470832) * 470832, -470832, 2)
    exact = mpmath.mpf(665857) - 470832 * mpmath.sqrt(2)
    with mpmath.workprec(300):
        exact = mpmath.mpf(665857) - 470832 * mpmath.sqrt(2)
        assert abs(to_float(x, 128) - exact) <= abs(exact) * mpmath.mpf(2) ** -120


@pytest.mark.parametrize("m", [2, 3, 5, 7])
def test_field_axioms_on_random_elements(m):
    rnd = random.Random(m)
    for _ in range(200):
        x, y, z = (_random_surd(rnd, m) for _ in range(3))
        assert (x + y) + z == x + (y + z)
        assert (x * y) * z == x * (y * z)
        assert x * (y + z) == x * y + x * z
        assert surd_add(x, surd_neg(x)) == 0
        if x:
            assert x * surd_inv(x) == 1


@pytest.mark.parametrize("m", [2, 3, 6, 10])
def test_floor_brackets_value(m):
    rnd = random.Random(100 + m)
    for _ in range(300):
        x = _random_surd(rnd, m)
        k = surd_floor(x)
        assert surd_sign(x - k) >= 0
        assert surd_sign(x - (k + 1)) < 0


@pytest.mark.parametrize("m", [2, 3, 5])
def test_to_float_precision_consistency(m):
    rnd = random.Random(7 * m)
    for _ in range(100):
        x = _random_surd(rnd, m)
        lo = to_float(x, 64)
        hi = to_float(x, 128)
        with mpmath.workprec(128):
            assert abs(hi - lo) <= abs(hi) * mpmath.mpf(2) ** -62 + mpmath.mpf(2) ** -200


def test_ordering_matches_floats():
    rnd = random.Random(5)
    for _ in range(200):
        x, y = _random_surd(rnd, 3), _random_surd(rnd, 3)
        if float(x) != float(y):
            assert (x < y) == (float(x) < float(y))


def test_mixed_fields_need_a_rational_operand():
    with pytest.raises(DomainError):
        SurdNumber(0, 1, 2) + SurdNumber(0, 1, 3)
    assert SurdNumber(0, 1, 5) + SurdNumber(1, 0, 2) == SurdNumber(1, 1, 5)


@pytest.mark.parametrize(
    "text, m, expected",
    [
        ("3/10", 4, SurdNumber(Fraction(3, 10), 0, 4)),
        ("-1/2+1/2*sqrt(5)", 5, SurdNumber(Fraction(-1, 2), Fraction(1, 2), 5)),
        ("1/2*sqrt(2)", 2, SurdNumber(0, Fraction(1, 2), 2)),
        ("1-sqrt(3)", 3, SurdNumber(1, -1, 3)),
        ("sqrt(7)", 7, SurdNumber(0, 1, 7)),
        ("0/1", 1, SurdNumber(0, 0, 1)),
    ],
)
def test_parse_surd(text, m, expected):
    assert parse_surd(text, m) == expected


@pytest.mark.parametrize("text", ["", "abc", "1/0", "1/2*sqrt(3)", "1 sqrt(2)", "1/2+*sqrt(2)"])
def test_parse_surd_rejects(text):
    with pytest.raises(ValidationError):
        parse_surd(text, 2)


def test_surd_str_round_trips_through_parser():
    rnd = random.Random(11)
    for _ in range(50):
        x = _random_surd(rnd, 6)
        assert parse_surd(str(x), 6) == x


def test_context_invariants(ctx):
    assert ctx.theta * ctx.theta == Fraction(1, ctx.m)
    assert ctx.m_theta * ctx.theta == 1
    assert ctx.theta_f == pytest.approx(1 / math.sqrt(ctx.m), rel=1e-15)
    assert ctx.log_norm_f == pytest.approx(math.log1p(1 / ctx.m), rel=1e-15)


@pytest.mark.parametrize("m", [0, -1, 10_001])
def test_context_rejects_bad_m(m):
    with pytest.raises(DomainError):
        ThetaContext.create(m)


def test_context_domain_check(ctx2):
    ctx2.check_domain(ctx2.theta)
    ctx2.check_domain(ctx2.surd(0))
    with pytest.raises(DomainError):
        ctx2.check_domain(ctx2.surd(1))
    with pytest.raises(DomainError):
        ctx2.check_domain(ctx2.surd(Fraction(-1, 10)))
