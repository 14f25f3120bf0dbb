"""Closed-form measures on [0, θ] and [0, θ]².

All CDFs are evaluated from their closed forms; nothing here integrates
numerically except the custom grid densities, whose piecewise-linear shape is
integrated exactly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy.special import digamma

from .const import (
    DEFAULT_MAX_TERMS,
    MEASURE_CUSTOM,
    MEASURE_GAMMA,
    MEASURE_GAMMA_A,
    MEASURE_GAMMA_A_HALF,
    MEASURE_GAMMA_A_PREFIX,
    MEASURE_LEBESGUE,
    REJECTION_BATCH,
    REJECTION_MAX_ROUNDS,
)
from .errors import DomainError, ValidationError
from .numerics import ThetaContext

if TYPE_CHECKING:
    from .operator import GridFunction

_LOGGER = logging.getLogger(__name__)

_SLACK = 1 + 4e-16


def _as_checked(x, ctx: ThetaContext, what: str = "x") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.any(~(arr >= 0.0)) or np.any(arr > ctx.theta_f * _SLACK):
        raise DomainError(f"{what} outside [0, θ={ctx.theta_f!r}]")
    return np.minimum(arr, ctx.theta_f)


def _out(value: np.ndarray):
    return float(value) if np.ndim(value) == 0 else value


def lebesgue_cdf(x, ctx: ThetaContext):
    """λ_θ([0, x]) = x/θ (normalized so that λ_θ([0, θ]) = 1)."""
    return _out(_as_checked(x, ctx) / ctx.theta_f)


def gamma_density(x, ctx: ThetaContext):
    """Density of γ_θ with respect to dx: θ/((1 + θx)·log(1 + θ²))."""
    arr = _as_checked(x, ctx)
    return _out(ctx.theta_f / ((1.0 + ctx.theta_f * arr) * ctx.log_norm_f))


def gamma_cdf(x, ctx: ThetaContext):
    """γ_θ([0, x]) = log(1 + θx)/log(1 + θ²)."""
    arr = _as_checked(x, ctx)
    return _out(np.log1p(ctx.theta_f * arr) / ctx.log_norm_f)


def gamma_inverse_cdf(u, ctx: ThetaContext):
    arr = np.asarray(u, dtype=np.float64)
    return _out(np.minimum(np.expm1(ctx.log_norm_f * arr) / ctx.theta_f, ctx.theta_f))


def gk_limit_cdf(x, ctx: ThetaContext):
    """The Gauss-Kuzmin limit log((mθ + x)θ)/log(1 + θ²)."""
    arr = _as_checked(x, ctx)
    m_theta = ctx.m * ctx.theta_f
    return _out(np.log((m_theta + arr) * ctx.theta_f) / ctx.log_norm_f)


def gamma_a_cdf(x, a: float, ctx: ThetaContext):
    """γ_{θ,a}([0, x]) = (aθ + 1)x/((ax + 1)θ); a = 0 gives λ_θ."""
    arr = _as_checked(x, ctx)
    a = float(_as_checked(a, ctx, "a"))
    th = ctx.theta_f
    return _out((a * th + 1.0) * arr / ((a * arr + 1.0) * th))


def gamma_a_inverse_cdf(u, a: float, ctx: ThetaContext):
    arr = np.asarray(u, dtype=np.float64)
    th = ctx.theta_f
    return _out(np.minimum(arr * th / (1.0 + a * th * (1.0 - arr)), th))


def gamma_a_density(x, a: float, ctx: ThetaContext):
    """Density of γ_{θ,a} with respect to λ_θ: (aθ + 1)/(ax + 1)²."""
    arr = _as_checked(x, ctx)
    return _out((a * ctx.theta_f + 1.0) / (a * arr + 1.0) ** 2)


def extended_rectangle(a: float, b: float, c: float, d: float, ctx: ThetaContext) -> float:
    """γ̄_θ((a, b) × (c, d)) for the measure with density ∝ (1 + xy)⁻² on [0, θ]²."""
    a, b, c, d = (float(_as_checked(v, ctx, name)) for v, name in ((a, "a"), (b, "b"), (c, "c"), (d, "d")))
    if a > b or c > d:
        raise DomainError(f"rectangle ({a}, {b}) x ({c}, {d}) has reversed sides")
    if a == b or c == d:
        return 0.0
    value = math.log1p(a * c) + math.log1p(b * d) - math.log1p(a * d) - math.log1p(b * c)
    return value / ctx.log_norm_f


def preimage_terms(x: float, ctx: ThetaContext, first: int, last: int) -> np.ndarray:
    """γ_θ-masses of the branches u_i([0, x)) for i = first…last."""
    i = np.arange(first, last + 1, dtype=np.float64)
    th = ctx.theta_f
    return (np.log1p(1.0 / i) - np.log1p(th / (x + i * th))) / ctx.log_norm_f


def preimage_tail(x: float, index: int, ctx: ThetaContext) -> float:
    """Exact sum of the preimage series beyond ``index`` (telescoped)."""
    return math.log1p(x / ((index + 1) * ctx.theta_f)) / ctx.log_norm_f


def invariance_check(
    x: float, tail_eps: float, ctx: ThetaContext, max_terms: int = DEFAULT_MAX_TERMS
) -> float:
    """|γ_θ(T_θ⁻¹[0, x)) − γ_θ([0, x))| from the preimage series.

    The series is summed explicitly until its analytic tail drops below
    ``tail_eps`` or ``max_terms`` terms were taken; the remainder is then
    added in closed form.
    """
    x = float(_as_checked(x, ctx))
    if tail_eps <= 0:
        raise DomainError(f"tail_eps must be positive, got {tail_eps}")
    th = ctx.theta_f
    needed = math.ceil(x / (th * ctx.log_norm_f * tail_eps)) if x > 0 else ctx.m
    last = max(ctx.m, min(needed, ctx.m + max_terms - 1))
    total = math.fsum(preimage_terms(x, ctx, ctx.m, last).tolist())
    tail = preimage_tail(x, last, ctx)
    residual = abs(total + tail - gamma_cdf(x, ctx))
    _LOGGER.debug("invariance_check: x=%.17g terms=%d tail=%.3e residual=%.3e", x, last - ctx.m + 1, tail, residual)
    return residual


def preimage_lebesgue_cdf(x, ctx: ThetaContext):
    """λ_θ(T_θ⁻¹[0, x)) = (ψ(m + x/θ) − ψ(m))/θ²."""
    arr = _as_checked(x, ctx)
    return _out((digamma(ctx.m + arr / ctx.theta_f) - digamma(ctx.m)) * ctx.m)


def stationary_digit_law(i, ctx: ThetaContext):
    """γ_θ(a_1 = i) = log((i + 1)²/(i(i + 2)))/log(1 + θ²)."""
    arr = np.asarray(i, dtype=np.float64)
    if np.any(arr < ctx.m):
        raise DomainError(f"digit below m={ctx.m}")
    return _out(np.log1p(1.0 / (arr * (arr + 2.0))) / ctx.log_norm_f)


@dataclass(frozen=True)
class MeasureKind:
    """A starting measure on [0, θ]: lebesgue, gamma, gamma_a(a) or a custom grid density."""

    tag: str
    a: Optional[float] = None
    density: Optional["GridFunction"] = None

    @classmethod
    def lebesgue(cls) -> MeasureKind:
        return cls(MEASURE_LEBESGUE)

    @classmethod
    def gamma(cls) -> MeasureKind:
        return cls(MEASURE_GAMMA)

    @classmethod
    def gamma_a(cls, a: float) -> MeasureKind:
        if a == 0:
            # γ_{θ,0} = λ_θ
            return cls.lebesgue()
        return cls(MEASURE_GAMMA_A, a=float(a))

    @classmethod
    def custom(cls, density: "GridFunction") -> MeasureKind:
        return cls(MEASURE_CUSTOM, density=density)

    @classmethod
    def from_flag(cls, flag: str, ctx: ThetaContext) -> MeasureKind:
        """Parse ``lebesgue``, ``gamma``, ``gamma-a:<a>`` or ``gamma-a:half``."""
        text = (flag or "").strip().lower()
        if text == MEASURE_LEBESGUE:
            return cls.lebesgue()
        if text == MEASURE_GAMMA:
            return cls.gamma()
        if text.startswith(MEASURE_GAMMA_A_PREFIX):
            raw = text[len(MEASURE_GAMMA_A_PREFIX):]
            if raw == MEASURE_GAMMA_A_HALF:
                return cls.gamma_a(ctx.theta_f / 2)
            try:
                a = float(raw)
            except ValueError as exc:
                raise ValidationError(f"bad gamma-a parameter {raw!r}") from exc
            if not 0.0 <= a <= ctx.theta_f:
                raise ValidationError(f"gamma-a parameter {a} outside [0, θ={ctx.theta_f!r}]")
            return cls.gamma_a(a)
        raise ValidationError(f"unknown measure {flag!r}")

    def label(self) -> str:
        if self.tag == MEASURE_GAMMA_A:
            return f"{MEASURE_GAMMA_A_PREFIX}{self.a!r}"
        return self.tag

    def cdf(self, x, ctx: ThetaContext):
        if self.tag == MEASURE_LEBESGUE:
            return lebesgue_cdf(x, ctx)
        if self.tag == MEASURE_GAMMA:
            return gamma_cdf(x, ctx)
        if self.tag == MEASURE_GAMMA_A:
            return gamma_a_cdf(x, self.a, ctx)
        arr = _as_checked(x, ctx)
        return _out(self.density.cumulative(arr) / self.density.integral())

    def density_on(self, nodes: np.ndarray, ctx: ThetaContext) -> np.ndarray:
        """Density with respect to λ_θ evaluated at ``nodes``."""
        nodes = _as_checked(nodes, ctx)
        if self.tag == MEASURE_LEBESGUE:
            return np.ones_like(nodes)
        if self.tag == MEASURE_GAMMA:
            return ctx.theta_f * np.asarray(gamma_density(nodes, ctx))
        if self.tag == MEASURE_GAMMA_A:
            return np.asarray(gamma_a_density(nodes, self.a, ctx))
        scale = ctx.theta_f / self.density.integral()
        return self.density(nodes) * scale

    def sample(self, size: int, rng: np.random.Generator, ctx: ThetaContext) -> np.ndarray:
        if self.tag == MEASURE_LEBESGUE:
            return rng.random(size) * ctx.theta_f
        if self.tag == MEASURE_GAMMA:
            return gamma_inverse_cdf(rng.random(size), ctx)
        if self.tag == MEASURE_GAMMA_A:
            return gamma_a_inverse_cdf(rng.random(size), self.a, ctx)
        return self._rejection_sample(size, rng, ctx)

    def _rejection_sample(self, size: int, rng: np.random.Generator, ctx: ThetaContext) -> np.ndarray:
        values = np.asarray(self.density.values)
        if np.any(values < 0) or not np.all(np.isfinite(values)) or values.max() <= 0:
            raise ValidationError("custom density must be finite, non-negative and not identically zero")
        ceiling = float(values.max())
        out = np.empty(size)
        filled = 0
        for _ in range(REJECTION_MAX_ROUNDS):
            if filled >= size:
                break
            batch = max(REJECTION_BATCH, 2 * (size - filled))
            proposal = rng.random(batch) * ctx.theta_f
            keep = proposal[rng.random(batch) * ceiling < self.density(proposal)]
            take = min(size - filled, keep.size)
            out[filled:filled + take] = keep[:take]
            filled += take
        if filled < size:
            raise ValidationError("custom density could not be sampled by rejection")
        return out
