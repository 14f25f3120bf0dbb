"""The θ-expansion: the map T_θ, digits, convergents and fundamental intervals."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .const import DEFAULT_EXPAND_MAX
from .ddouble import dd_add, dd_div, dd_floor, dd_from_surd, dd_less, dd_mul, dd_sub
from .errors import DomainError
from .numerics import SurdNumber, ThetaContext, surd_sign

_LOGGER = logging.getLogger(__name__)

# a_1(0) = ∞
INFINITE_DIGIT: float = math.inf


@dataclass(frozen=True)
class DigitSequence:
    digits: tuple[int, ...]
    terminated: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))

    def __len__(self) -> int:
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)

    def prefix(self, n: int) -> DigitSequence:
        return DigitSequence(self.digits[:n], self.terminated and n >= len(self.digits))

    def ends_in(self, m: int) -> bool:
        """True for a finite expansion whose last digit is m (only x = θ-type endpoints)."""
        return self.terminated and bool(self.digits) and self.digits[-1] == m


@dataclass(frozen=True)
class ConvergentPair:
    p: SurdNumber
    q: SurdNumber
    index: int

    @property
    def value(self) -> SurdNumber:
        return self.p / self.q


@dataclass(frozen=True)
class FundamentalInterval:
    lower: SurdNumber
    upper: SurdNumber
    digits: DigitSequence

    def contains(self, x: SurdNumber) -> bool:
        # left-open, right-closed when classifying points
        return self.lower < x <= self.upper

    def as_floats(self) -> tuple[float, float]:
        return float(self.lower), float(self.upper)


def _check_digits(digits: Sequence[int], ctx: ThetaContext) -> None:
    for d in digits:
        if d < ctx.m:
            raise DomainError(f"digit {d} is below m={ctx.m}")


def first_digit(x: SurdNumber, ctx: ThetaContext) -> int | float:
    """a_1(x) = ⌊1/(xθ)⌋, or INFINITE_DIGIT for x = 0."""
    ctx.check_domain(x)
    if not x:
        return INFINITE_DIGIT
    return math.floor(1 / (x * ctx.theta))


def gauss_map(x: SurdNumber, ctx: ThetaContext) -> SurdNumber:
    """T_θ(x) = 1/x − θ⌊1/(xθ)⌋, with T_θ(0) = 0."""
    ctx.check_domain(x)
    if not x:
        return ctx.surd(0)
    return 1 / x - ctx.theta * math.floor(1 / (x * ctx.theta))


def _expand(x: SurdNumber, n_max: int, ctx: ThetaContext, cap: int) -> tuple[list[int], SurdNumber]:
    ctx.check_domain(x)
    if n_max < 0:
        raise DomainError(f"n_max must be non-negative, got {n_max}")
    if n_max > cap:
        _LOGGER.warning("expand: n_max=%s capped at %s", n_max, cap)
        n_max = cap
    digits: list[int] = []
    for _ in range(n_max):
        if not x:
            break
        inv = 1 / x
        digit = math.floor(inv * ctx.m_theta)
        digits.append(digit)
        x = inv - ctx.theta * digit
    return digits, x


def expand(x: SurdNumber, n_max: int, ctx: ThetaContext, cap: int = DEFAULT_EXPAND_MAX) -> DigitSequence:
    """Digits a_1…a_k of x, k ≤ n_max; terminated iff some iterate is exactly 0."""
    digits, rest = _expand(x, n_max, ctx, cap)
    seq = DigitSequence(tuple(digits), terminated=not rest)
    if seq.ends_in(ctx.m) and len(seq) > 0:
        _LOGGER.debug("expand: finite expansion of %s ends in m=%s", x, ctx.m)
    return seq


def remainder(x: SurdNumber, n: int, ctx: ThetaContext) -> SurdNumber:
    """T_θⁿ(x) (0 once the expansion has terminated)."""
    _, rest = _expand(x, n, ctx, max(n, DEFAULT_EXPAND_MAX))
    return rest


def expand_positive(
    x: SurdNumber, n_max: int, ctx: ThetaContext, cap: int = DEFAULT_EXPAND_MAX
) -> tuple[int, DigitSequence]:
    """[a_0θ; a_1θ, a_2θ, …] for any x ≥ 0, with a_0 = ⌊x/θ⌋."""
    if surd_sign(x) < 0:
        raise DomainError(f"x={x} must be non-negative")
    a0 = math.floor(x / ctx.theta)
    return a0, expand(x - ctx.theta * a0, n_max, ctx, cap)


def convergents(digits: DigitSequence | Sequence[int], ctx: ThetaContext) -> list[ConvergentPair]:
    """(p_k, q_k) for k = 0…n from p_{-1}=1, p_0=0, q_{-1}=0, q_0=1."""
    ds = tuple(digits)
    if not ds:
        raise DomainError("convergents need at least one digit")
    _check_digits(ds, ctx)
    p_prev, p = ctx.surd(1), ctx.surd(0)
    q_prev, q = ctx.surd(0), ctx.surd(1)
    pairs = [ConvergentPair(p, q, 0)]
    for k, a in enumerate(ds, start=1):
        step = ctx.theta * a
        p_prev, p = p, step * p + p_prev
        q_prev, q = q, step * q + q_prev
        pairs.append(ConvergentPair(p, q, k))
    return pairs


def _last_two(digits: Sequence[int], ctx: ThetaContext) -> tuple[ConvergentPair, ConvergentPair]:
    if not digits:
        return ConvergentPair(ctx.surd(1), ctx.surd(0), -1), ConvergentPair(ctx.surd(0), ctx.surd(1), 0)
    pairs = convergents(digits, ctx)
    return pairs[-2], pairs[-1]


def evaluate_cf(digits: DigitSequence | Sequence[int], tail: SurdNumber, ctx: ThetaContext) -> SurdNumber:
    """(p_n + t·p_{n−1})/(q_n + t·q_{n−1}); with t = 0 the n-th convergent."""
    ctx.check_domain(tail, "tail")
    prev, last = _last_two(tuple(digits), ctx)
    return (last.p + tail * prev.p) / (last.q + tail * prev.q)


def approx_error_bounds(
    pair_n: ConvergentPair, pair_n1: ConvergentPair, ctx: ThetaContext
) -> tuple[SurdNumber, SurdNumber]:
    """Bracket for |x − p_n/q_n| from consecutive convergents."""
    if pair_n1.index != pair_n.index + 1:
        raise DomainError(f"convergents {pair_n.index} and {pair_n1.index} are not consecutive")
    lower = 1 / (pair_n.q * (pair_n1.q + ctx.theta * pair_n.q))
    upper = 1 / (pair_n.q * pair_n1.q)
    return lower, upper


def approx_error(x: SurdNumber, n: int, ctx: ThetaContext) -> SurdNumber:
    """Signed x − p_n/q_n = (−1)^n Tⁿx / (q_n(q_n + Tⁿx·q_{n−1}))."""
    digits, rest = _expand(x, n, ctx, max(n, DEFAULT_EXPAND_MAX))
    if len(digits) < n:
        raise DomainError(f"expansion of {x} terminates after {len(digits)} < {n} digits")
    prev, last = _last_two(digits, ctx)
    sign = -1 if n % 2 else 1
    return sign * rest / (last.q * (last.q + rest * prev.q))


def fundamental_interval(digits: DigitSequence | Sequence[int], ctx: ThetaContext) -> FundamentalInterval:
    """I(a_1…a_n) with endpoints p_n/q_n and (p_n + θp_{n−1})/(q_n + θq_{n−1}).

    The first one is the right end for odd n and the left end for even n.
    The empty prefix gives [0, θ].
    """
    ds = tuple(digits)
    _check_digits(ds, ctx)
    prev, last = _last_two(ds, ctx)
    at_zero = last.p / last.q
    at_theta = (last.p + ctx.theta * prev.p) / (last.q + ctx.theta * prev.q)
    seq = digits if isinstance(digits, DigitSequence) else DigitSequence(ds)
    if len(ds) % 2:
        return FundamentalInterval(at_theta, at_zero, seq)
    return FundamentalInterval(at_zero, at_theta, seq)


def interval_lebesgue(iv: FundamentalInterval, ctx: ThetaContext) -> SurdNumber:
    """Normalized Lebesgue measure of I(a_1…a_n): 1/(q_n(q_n + θq_{n−1}))."""
    prev, last = _last_two(tuple(iv.digits), ctx)
    return 1 / (last.q * (last.q + ctx.theta * prev.q))


def gauss_map_array(x: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Float64 T_θ on an array; returns (T_θ(x), a_1(x)) with a_1 = inf at 0."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = 1.0 / x
        digit = np.floor(inv / theta)
        out = inv - theta * digit
    zero = ~(x > 0.0)
    out = np.where(zero, 0.0, np.clip(out, 0.0, theta))
    digit = np.where(zero, np.inf, digit)
    return out, digit


def first_digit_array(x: np.ndarray, theta: float) -> np.ndarray:
    return gauss_map_array(x, theta)[1]


@lru_cache(maxsize=None)
def _dd_constants(ctx: ThetaContext) -> tuple[float, float, float, float]:
    return (*dd_from_surd(ctx.theta), *dd_from_surd(ctx.m_theta))


def gauss_map_dd(hi: np.ndarray, lo: np.ndarray, ctx: ThetaContext) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """T_θ on double-double arrays; returns (hi, lo, a_1) of the image, with a_1 = inf at 0.

    The digit is ⌊√m/x⌋ of the double-double quotient, moved by one
    whenever the remainder leaves [0, θ).
    """
    th_hi, th_lo, sm_hi, sm_lo = _dd_constants(ctx)
    hi = np.asarray(hi, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    zero = ~(hi > 0.0)
    safe_hi = np.where(zero, th_hi, hi)
    safe_lo = np.where(zero, th_lo, lo)
    one = np.ones_like(safe_hi)
    inv_hi, inv_lo = dd_div(one, np.zeros_like(one), safe_hi, safe_lo)
    digit = dd_floor(*dd_mul(inv_hi, inv_lo, sm_hi, sm_lo))
    out_hi, out_lo = dd_sub(inv_hi, inv_lo, *dd_mul(th_hi, th_lo, digit, np.zeros_like(digit)))
    below = out_hi < 0.0
    if below.any():
        digit = digit - below
        fix_hi, fix_lo = dd_add(out_hi, out_lo, th_hi, th_lo)
        out_hi, out_lo = np.where(below, fix_hi, out_hi), np.where(below, fix_lo, out_lo)
    above = ~dd_less(out_hi, out_lo, th_hi, th_lo)
    if above.any():
        digit = digit + above
        fix_hi, fix_lo = dd_sub(out_hi, out_lo, th_hi, th_lo)
        out_hi, out_lo = np.where(above, fix_hi, out_hi), np.where(above, fix_lo, out_lo)
    out_hi = np.where(zero, 0.0, out_hi)
    out_lo = np.where(zero, 0.0, out_lo)
    return out_hi, out_lo, np.where(zero, np.inf, digit)
