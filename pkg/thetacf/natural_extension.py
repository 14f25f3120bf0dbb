"""The natural extension T̄_θ(x, y) = (T_θ(x), 1/(a_1(x)θ + y)) on [0, θ]²."""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .const import DEFAULT_SWEEP_DEPTH, DEFAULT_SWEEP_MAX_EXCESS
from .errors import DomainError
from .expansion import DigitSequence, FundamentalInterval, first_digit, fundamental_interval, gauss_map, gauss_map_array
from .measures import extended_rectangle
from .numerics import SurdNumber, ThetaContext

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SquarePoint:
    x: SurdNumber
    y: SurdNumber

    def as_floats(self) -> tuple[float, float]:
        return float(self.x), float(self.y)


def _check(p: SquarePoint, ctx: ThetaContext) -> None:
    ctx.check_domain(p.x, "x")
    ctx.check_domain(p.y, "y")


def ext_map(p: SquarePoint, ctx: ThetaContext) -> SquarePoint:
    _check(p, ctx)
    if not p.x:
        raise DomainError("T̄_θ is undefined at x = 0 (a_1 = ∞)")
    digit = first_digit(p.x, ctx)
    return SquarePoint(gauss_map(p.x, ctx), 1 / (ctx.theta * digit + p.y))


def ext_inverse(p: SquarePoint, ctx: ThetaContext) -> SquarePoint:
    """(1/(a_1(y)θ + x), T_θ(y)); inverts ext_map for y < θ."""
    _check(p, ctx)
    if not p.y:
        raise DomainError("T̄_θ⁻¹ is undefined at y = 0 (a_1 = ∞)")
    digit = first_digit(p.y, ctx)
    return SquarePoint(1 / (ctx.theta * digit + p.x), gauss_map(p.y, ctx))


def ext_iterate(p: SquarePoint, n: int, ctx: ThetaContext) -> SquarePoint:
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    for _ in range(n):
        p = ext_map(p, ctx)
    return p


def ext_iterate_inverse(p: SquarePoint, n: int, ctx: ThetaContext) -> SquarePoint:
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    for _ in range(n):
        p = ext_inverse(p, ctx)
    return p


def ext_map_array(x: np.ndarray, y: np.ndarray, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Float64 T̄_θ on arrays; points with x = 0 are sent to (0, 0)."""
    out_x, digit = gauss_map_array(x, theta)
    with np.errstate(invalid="ignore"):
        out_y = 1.0 / (digit * theta + np.asarray(y, dtype=np.float64))
    return out_x, np.minimum(out_y, theta)


def image_rectangle(
    digits_h: Sequence[int], digits_v: Sequence[int], ctx: ThetaContext
) -> tuple[FundamentalInterval, FundamentalInterval]:
    """T̄_θ(I(i_1…i_n) × I(j_1…j_t)) = I(i_2…i_n) × I(i_1, j_1…j_t)."""
    digits_h = tuple(digits_h)
    if not digits_h:
        raise DomainError("the horizontal digit string must be non-empty")
    return (
        fundamental_interval(DigitSequence(digits_h[1:]), ctx),
        fundamental_interval(DigitSequence((digits_h[0],) + tuple(digits_v)), ctx),
    )


def _rectangle_measure(h: FundamentalInterval, v: FundamentalInterval, ctx: ThetaContext) -> float:
    a, b = h.as_floats()
    c, d = v.as_floats()
    return extended_rectangle(a, b, c, d, ctx)


def preservation_check(digits_h: Sequence[int], digits_v: Sequence[int], ctx: ThetaContext) -> float:
    """|γ̄_θ(T̄_θ R) − γ̄_θ(R)| for R = I(digits_h) × I(digits_v)."""
    source = _rectangle_measure(
        fundamental_interval(DigitSequence(tuple(digits_h)), ctx),
        fundamental_interval(DigitSequence(tuple(digits_v)), ctx),
        ctx,
    )
    image = _rectangle_measure(*image_rectangle(digits_h, digits_v, ctx), ctx)
    return abs(image - source)


def _strings(ctx: ThetaContext, depth: int, max_excess: int, min_length: int) -> Iterator[tuple[int, ...]]:
    alphabet = range(ctx.m, ctx.m + max_excess + 1)
    for length in range(min_length, depth + 1):
        yield from itertools.product(alphabet, repeat=length)


def preservation_sweep(
    ctx: ThetaContext, depth: int = DEFAULT_SWEEP_DEPTH, max_excess: int = DEFAULT_SWEEP_MAX_EXCESS
) -> tuple[float, int]:
    """Largest preservation residual over every rectangle with strings of length ≤ depth.

    Horizontal strings have length 1…depth and vertical ones 0…depth, with
    digits in m…m + max_excess. Returns (max residual, rectangles checked).
    """
    if depth < 1 or max_excess < 0:
        raise DomainError(f"need depth ≥ 1 and max_excess ≥ 0, got {depth}, {max_excess}")

    @lru_cache(maxsize=None)
    def interval(digits: tuple[int, ...]) -> tuple[float, float]:
        return fundamental_interval(DigitSequence(digits), ctx).as_floats()

    worst = 0.0
    count = 0
    for h in _strings(ctx, depth, max_excess, 1):
        for v in _strings(ctx, depth, max_excess, 0):
            source = extended_rectangle(*interval(h), *interval(v), ctx)
            image = extended_rectangle(*interval(h[1:]), *interval(h[:1] + v), ctx)
            worst = max(worst, abs(image - source))
            count += 1
    _LOGGER.info("preservation_sweep: m=%d depth=%d rectangles=%d max residual=%.3e", ctx.m, depth, count, worst)
    return worst, count
