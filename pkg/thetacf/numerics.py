"""Exact arithmetic in the real quadratic field Q(√m).

Every quantity the θ-expansion manipulates (θ itself, iterates of T_θ started
at such points, convergents, fundamental-interval endpoints) stays inside this
field, so digits are extracted without any rounding. Conversion to floating
point happens only through :func:`to_float`.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import total_ordering
from math import floor, isqrt
from typing import Union

import mpmath

from .const import DEFAULT_PRECISION, MAX_M, MIN_M, MIN_PRECISION
from .errors import DomainError, ValidationError

_LOGGER = logging.getLogger(__name__)

Rational = Fraction
RationalLike = Union[int, Fraction]

# guard bits used before the final rounding in to_float
_GUARD_BITS = 32
# scale of the integer square-root bracket in surd_floor
_FLOOR_SCALE_BITS = 64


def _is_square(m: int) -> bool:
    r = isqrt(m)
    return r * r == m


def _sign(q: Fraction) -> int:
    return (q > 0) - (q < 0)


@total_ordering
class SurdNumber:
    """The exact real number a + b·√m with rational a, b.

    For square m the irrational part is folded into ``a`` so that equality is
    component-wise in every case.
    """

    __slots__ = ("_a", "_b", "_m")

    def __init__(self, a: RationalLike = 0, b: RationalLike = 0, m: int = 1) -> None:
        if not isinstance(m, int) or m < MIN_M:
            raise DomainError(f"m must be a positive integer, got {m!r}")
        a = Fraction(a)
        b = Fraction(b)
        if b and _is_square(m):
            a += b * isqrt(m)
            b = Fraction(0)
        self._a: Fraction = a
        self._b: Fraction = b
        self._m: int = m

    @property
    def a(self) -> Fraction:
        return self._a

    @property
    def b(self) -> Fraction:
        return self._b

    @property
    def m(self) -> int:
        return self._m

    @property
    def is_rational(self) -> bool:
        return self._b == 0

    @classmethod
    def from_rational(cls, q: RationalLike, m: int = 1) -> SurdNumber:
        return cls(q, 0, m)

    def conjugate(self) -> SurdNumber:
        return SurdNumber(self._a, -self._b, self._m)

    def norm(self) -> Fraction:
        return self._a * self._a - self._b * self._b * self._m

    def _coerce(self, other: object) -> SurdNumber | None:
        if isinstance(other, SurdNumber):
            if other.m == self._m:
                return other
            if other.is_rational:
                return SurdNumber(other.a, 0, self._m)
            if self.is_rational:
                return other
            raise DomainError(f"operands live in different fields: m={self._m} vs m={other.m}")
        if isinstance(other, (int, Fraction)):
            return SurdNumber(other, 0, self._m)
        return None

    def _common(self, other: SurdNumber) -> SurdNumber:
        # a rational self may have to adopt the other's m
        if self._m != other.m and self.is_rational:
            return SurdNumber(self._a, 0, other.m)
        return self

    def __repr__(self) -> str:
        return f"SurdNumber({self._a!s}, {self._b!s}, {self._m})"

    def __str__(self) -> str:
        if self._b == 0:
            return str(self._a)
        coef = "" if abs(self._b) == 1 else f"{abs(self._b)}*"
        sign = "-" if self._b < 0 else "+"
        if self._a == 0:
            return f"{'-' if self._b < 0 else ''}{coef}sqrt({self._m})"
        return f"{self._a}{sign}{coef}sqrt({self._m})"

    def __hash__(self) -> int:
        if self._b == 0:
            return hash(self._a)
        return hash((self._a, self._b, self._m))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, float):
            return float(self) == other
        try:
            o = self._coerce(other)
        except DomainError:
            return False
        if o is None:
            return NotImplemented
        s = self._common(o)
        return s.a == o.a and s.b == o.b

    def __lt__(self, other: object) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return surd_cmp(self._common(o), o) < 0

    def __add__(self, other: object) -> SurdNumber:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return surd_add(self._common(o), o)

    __radd__ = __add__

    def __neg__(self) -> SurdNumber:
        return surd_neg(self)

    def __pos__(self) -> SurdNumber:
        return self

    def __abs__(self) -> SurdNumber:
        return -self if surd_sign(self) < 0 else self

    def __sub__(self, other: object) -> SurdNumber:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return surd_add(self._common(o), surd_neg(o))

    def __rsub__(self, other: object) -> SurdNumber:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return surd_add(o, surd_neg(self))

    def __mul__(self, other: object) -> SurdNumber:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return surd_mul(self._common(o), o)

    __rmul__ = __mul__

    def __truediv__(self, other: object) -> SurdNumber:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return surd_mul(self._common(o), surd_inv(o))

    def __rtruediv__(self, other: object) -> SurdNumber:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return surd_mul(o, surd_inv(self))

    def __pow__(self, k: int) -> SurdNumber:
        if not isinstance(k, int):
            return NotImplemented
        base = self if k >= 0 else surd_inv(self)
        result = SurdNumber(1, 0, self._m)
        for _ in range(abs(k)):
            result = surd_mul(result, base)
        return result

    def __floor__(self) -> int:
        return surd_floor(self)

    def __bool__(self) -> bool:
        return bool(self._a) or bool(self._b)

    def __float__(self) -> float:
        return float(to_float(self, MIN_PRECISION))


def _check_same_field(x: SurdNumber, y: SurdNumber) -> None:
    if x.m != y.m and not (x.is_rational or y.is_rational):
        raise DomainError(f"operands live in different fields: m={x.m} vs m={y.m}")


def _field_of(x: SurdNumber, y: SurdNumber) -> int:
    return y.m if x.is_rational else x.m


def surd_add(x: SurdNumber, y: SurdNumber) -> SurdNumber:
    _check_same_field(x, y)
    return SurdNumber(x.a + y.a, x.b + y.b, _field_of(x, y))


def surd_neg(x: SurdNumber) -> SurdNumber:
    return SurdNumber(-x.a, -x.b, x.m)


def surd_mul(x: SurdNumber, y: SurdNumber) -> SurdNumber:
    _check_same_field(x, y)
    m = _field_of(x, y)
    return SurdNumber(x.a * y.a + x.b * y.b * m, x.a * y.b + x.b * y.a, m)


def surd_inv(x: SurdNumber) -> SurdNumber:
    """Reciprocal through the conjugate: 1/(a + b√m) = (a − b√m)/(a² − b²m)."""
    if not x:
        raise DomainError("inversion of zero")
    n = x.norm()
    return SurdNumber(x.a / n, -x.b / n, x.m)


def surd_sign(x: SurdNumber) -> int:
    """Exact sign of a + b√m using rational comparisons only."""
    sa = _sign(x.a)
    sb = _sign(x.b)
    if sb == 0:
        return sa
    if sa == 0 or sa == sb:
        return sb
    # opposite signs: the larger of a² and b²m wins
    lhs = x.a * x.a
    rhs = x.b * x.b * x.m
    if lhs > rhs:
        return sa
    if lhs < rhs:
        return sb
    return 0


def surd_cmp(x: SurdNumber, y: SurdNumber) -> int:
    _check_same_field(x, y)
    return surd_sign(surd_add(x, surd_neg(y)))


def surd_floor(x: SurdNumber) -> int:
    """Exact ⌊a + b√m⌋.

    b√m is bracketed by an integer square root at a fixed binary scale, and
    the resulting candidate is corrected by exact sign tests.
    """
    if x.b == 0:
        return floor(x.a)
    scale = 1 << _FLOOR_SCALE_BITS
    sq = x.b * x.b * x.m * scale * scale
    root = isqrt(sq.numerator // sq.denominator)
    approx = Fraction(root, scale) if x.b > 0 else -Fraction(root, scale)
    k = floor(x.a + approx)
    while surd_sign(x - k) < 0:
        k -= 1
    while surd_sign(x - (k + 1)) >= 0:
        k += 1
    return k


def _mpf(q: Fraction) -> mpmath.mpf:
    return mpmath.mpf(q.numerator) / q.denominator


def to_float(x: SurdNumber, precision: int = DEFAULT_PRECISION) -> mpmath.mpf:
    """Value of ``x`` rounded to ``precision`` bits.

    When a and b√m have opposite signs the value is evaluated as
    (a² − b²m)/(a − b√m) so no cancellation occurs.
    """
    if precision < MIN_PRECISION:
        raise DomainError(f"precision must be at least {MIN_PRECISION} bits, got {precision}")
    with mpmath.workprec(precision + _GUARD_BITS):
        if x.b == 0:
            value = _mpf(x.a)
        else:
            irr = _mpf(x.b) * mpmath.sqrt(x.m)
            if _sign(x.a) * _sign(x.b) >= 0:
                value = _mpf(x.a) + irr
            else:
                value = _mpf(x.norm()) / (_mpf(x.a) - irr)
    with mpmath.workprec(precision):
        return +value


_SQRT_PART = re.compile(
    r"(?P<sign>[+-]?)\s*(?:(?P<coef>\d+(?:/\d+)?)\s*\*\s*)?sqrt\(\s*(?P<radicand>\d+)\s*\)\s*$"
)
_RATIONAL = re.compile(r"^[+-]?\d+(?:/\d+)?$")


def _parse_rational(text: str) -> Fraction:
    text = text.replace(" ", "")
    if not _RATIONAL.match(text):
        raise ValidationError(f"not a rational number: {text!r}")
    try:
        return Fraction(text)
    except ZeroDivisionError as exc:
        raise ValidationError(f"zero denominator in {text!r}") from exc


def parse_surd(text: str, m: int) -> SurdNumber:
    """Parse ``A/B``, ``A/B+C/D*sqrt(M)`` (or its variants) into a SurdNumber over m."""
    if not isinstance(text, str) or not text.strip():
        raise ValidationError("empty number")
    s = text.strip().replace("−", "-")
    match = _SQRT_PART.search(s)
    if match is None:
        return SurdNumber(_parse_rational(s), 0, m)
    radicand = int(match.group("radicand"))
    if radicand != m:
        raise ValidationError(f"sqrt({radicand}) does not match the configured m={m}")
    head = s[: match.start()].strip()
    sign = match.group("sign")
    if head and not sign:
        raise ValidationError(f"missing sign before the sqrt term in {text!r}")
    coef = _parse_rational(match.group("coef")) if match.group("coef") else Fraction(1)
    if sign == "-":
        coef = -coef
    a = _parse_rational(head) if head else Fraction(0)
    return SurdNumber(a, coef, m)


@dataclass(frozen=True)
class ThetaContext:
    """The pair (m, θ = 1/√m) with the constants every module needs."""

    m: int
    precision: int
    theta: SurdNumber = field(repr=False)
    m_theta: SurdNumber = field(repr=False)
    log_norm: mpmath.mpf = field(repr=False)
    theta_f: float = field(repr=False)
    log_norm_f: float = field(repr=False)

    @classmethod
    def create(cls, m: int, precision: int = DEFAULT_PRECISION) -> ThetaContext:
        if isinstance(m, bool) or not isinstance(m, int) or not MIN_M <= m <= MAX_M:
            raise DomainError(f"m must be an integer in [{MIN_M}, {MAX_M}], got {m!r}")
        if precision < MIN_PRECISION:
            raise DomainError(f"precision must be at least {MIN_PRECISION} bits, got {precision}")
        theta = SurdNumber(0, Fraction(1, m), m)
        m_theta = SurdNumber(0, 1, m)
        with mpmath.workprec(precision):
            log_norm = mpmath.log1p(mpmath.mpf(1) / m)
        ctx = cls(
            m=m,
            precision=precision,
            theta=theta,
            m_theta=m_theta,
            log_norm=log_norm,
            theta_f=float(to_float(theta, MIN_PRECISION)),
            log_norm_f=float(log_norm),
        )
        _LOGGER.debug("ThetaContext created: m=%s theta=%s precision=%s", m, theta, precision)
        return ctx

    def surd(self, a: RationalLike = 0, b: RationalLike = 0) -> SurdNumber:
        return SurdNumber(a, b, self.m)

    def in_domain(self, x: SurdNumber) -> bool:
        return surd_sign(x) >= 0 and surd_cmp(x, self.theta) <= 0

    def check_domain(self, x: SurdNumber, what: str = "x") -> None:
        if not self.in_domain(x):
            raise DomainError(f"{what}={x} lies outside [0, θ] for m={self.m}")

    def check_float_domain(self, x: float, what: str = "x") -> None:
        # one ulp of slack at θ for values converted from exact surds
        if not 0.0 <= x <= self.theta_f * (1 + 4e-16):
            raise DomainError(f"{what}={x!r} lies outside [0, θ={self.theta_f!r}]")
