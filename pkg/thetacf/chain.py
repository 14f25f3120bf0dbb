"""The digit chain s_n = q_{n−1}/q_n and its transition law.

From state s the chain moves to u_i(s) = 1/(s + iθ) with probability
P_i(s) = (sθ + 1)/((s + iθ)(s + (i + 1)θ)), i ≥ m.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import mpmath
import numpy as np

from .const import DEFAULT_PRECISION
from .errors import DomainError
from .numerics import SurdNumber, ThetaContext, surd_sign, to_float

_LOGGER = logging.getLogger(__name__)

State = Union[float, SurdNumber]


def make_rng(seed: int, task: int = 0) -> np.random.Generator:
    """Counter-based generator for one task of a seeded run."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(task,))))


@dataclass(frozen=True)
class ChainState:
    s: State

    def __float__(self) -> float:
        return float(self.s)


@dataclass(frozen=True)
class ChainTrajectory:
    start: State
    states: tuple[ChainState, ...]
    digits: tuple[int, ...] = field(default=())

    def values(self) -> np.ndarray:
        return np.array([float(st) for st in self.states])


def _check_digit(i: int, ctx: ThetaContext) -> None:
    if i < ctx.m:
        raise DomainError(f"digit {i} is below m={ctx.m}")


def _check_state(s, ctx: ThetaContext) -> np.ndarray:
    arr = np.asarray(s, dtype=np.float64)
    if np.any(~(arr >= 0.0)) or np.any(arr > ctx.theta_f * (1 + 4e-16)):
        raise DomainError(f"state outside [0, θ={ctx.theta_f!r}]")
    return np.minimum(arr, ctx.theta_f)


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


def transition_prob(i, s, ctx: ThetaContext):
    """P_i(s); vectorized over ``i`` and ``s``."""
    i_arr = np.asarray(i)
    if np.any(i_arr < ctx.m):
        raise DomainError(f"digit below m={ctx.m}")
    s = _check_state(s, ctx)
    th = ctx.theta_f
    i_arr = i_arr.astype(np.float64)
    return _out((s * th + 1.0) / ((s + i_arr * th) * (s + (i_arr + 1.0) * th)))


def partial_mass(s, last, ctx: ThetaContext):
    """Σ_{i=m}^{last} P_i(s) = 1 − (sθ + 1)/(θ(s + (last + 1)θ))."""
    return _out(1.0 - np.asarray(tail_mass(s, last, ctx)))


def tail_mass(s, last, ctx: ThetaContext):
    """Σ_{i>last} P_i(s) = (sθ + 1)/θ · 1/(s + (last + 1)θ)."""
    s = _check_state(s, ctx)
    th = ctx.theta_f
    last = np.asarray(last, dtype=np.float64)
    if np.any(last < ctx.m - 1):
        raise DomainError(f"partial sums start at m={ctx.m}")
    return _out((s * th + 1.0) / (th * (s + (last + 1.0) * th)))


def u_map(i: int, s: State, ctx: ThetaContext) -> State:
    """u_i(s) = 1/(s + iθ); exact for SurdNumber states."""
    _check_digit(i, ctx)
    if isinstance(s, SurdNumber):
        ctx.check_domain(s, "s")
        return 1 / (s + ctx.theta * i)
    ctx.check_float_domain(float(s), "s")
    return 1.0 / (float(s) + i * ctx.theta_f)


def bbl_conditional_cdf(s_n, x, ctx: ThetaContext):
    """λ_θ(T_θⁿ < x | a_1…a_n) = (s_nθ + 1)x/(θ(s_n x + 1))."""
    s = _check_state(s_n, ctx)
    x = _check_state(x, ctx)
    th = ctx.theta_f
    return _out((s * th + 1.0) * x / (th * (s * x + 1.0)))


def digit_law(i, ctx: ThetaContext):
    """λ_θ(a_1 = i) = m/(i(i + 1))."""
    arr = np.asarray(i)
    if np.any(arr < ctx.m):
        raise DomainError(f"digit below m={ctx.m}")
    arr = arr.astype(np.float64)
    return _out(ctx.m / (arr * (arr + 1.0)))


def sample_digits(s, rand, ctx: ThetaContext) -> np.ndarray:
    """Smallest M ≥ m with Σ_{i=m}^{M} P_i(s) > rand, elementwise.

    The telescoped partial sum is inverted in closed form,
    M = ⌊m(1 + sθ)/(1 − rand) − s/θ⌋, and then corrected by one step where
    rounding put it on the wrong side. Digits are returned as float64 so that
    the extreme tail (rand close to 1) cannot overflow.
    """
    s = _check_state(s, ctx)
    rand = np.asarray(rand, dtype=np.float64)
    if np.any(rand < 0.0) or np.any(rand >= 1.0):
        raise DomainError("rand must lie in [0, 1)")
    s, rand = np.broadcast_arrays(s, rand)
    th = ctx.theta_f
    m = float(ctx.m)
    with np.errstate(divide="ignore", over="ignore"):
        digit = np.floor(m * (1.0 + s * th) / (1.0 - rand) - s / th)
    digit = np.maximum(digit, m)

    def cdf(k: np.ndarray) -> np.ndarray:
        return 1.0 - (s * th + 1.0) / (th * (s + (k + 1.0) * th))

    high = cdf(digit) <= rand
    digit = np.where(high, digit + 1.0, digit)
    low = (digit > m) & (cdf(digit - 1.0) > rand)
    digit = np.where(low, digit - 1.0, digit)
    return digit


def sample_digit(s: float, rand: float, ctx: ThetaContext) -> int:
    return int(sample_digits(s, rand, ctx))


def s_from_digits(digits: Sequence[int], ctx: ThetaContext) -> SurdNumber:
    """s_n = [a_nθ, a_{n−1}θ, …, a_1θ] evaluated exactly."""
    digits = tuple(digits)
    if not digits:
        raise DomainError("s_from_digits needs at least one digit")
    s = ctx.surd(0)
    for a in digits:
        _check_digit(a, ctx)
        s = 1 / (ctx.theta * a + s)
    return s


@dataclass(frozen=True)
class FixedPoint:
    """s* = (√(m + 4) − √m)/2, the fixed point of u_m.

    s* generally lies outside Q(√m); it is stored as s* = w·θ with
    w = (√(m(m + 4)) − m)/2 exact in Q(√(m(m + 4))).
    """

    m: int
    w: SurdNumber

    def is_root(self) -> bool:
        """Exact check of s*² + mθ·s* − 1 = 0, i.e. w²/m + w − 1 = 0."""
        return not (self.w * self.w / self.m + self.w - 1)

    def as_surd(self) -> SurdNumber:
        """s* as a single surd; only possible when θ is rational."""
        root = math.isqrt(self.m)
        if root * root != self.m:
            raise DomainError(f"s* is not a quadratic surd over Q for m={self.m}")
        return SurdNumber(Fraction(-root, 2), Fraction(1, 2), self.m + 4)

    def value(self, precision: int = DEFAULT_PRECISION) -> mpmath.mpf:
        with mpmath.workprec(precision + 16):
            out = to_float(self.w, precision + 16) / mpmath.sqrt(self.m)
        with mpmath.workprec(precision):
            return +out

    def __float__(self) -> float:
        return float(self.value(53))


def rscc_fixed_point(ctx: ThetaContext) -> FixedPoint:
    m = ctx.m
    w = SurdNumber(Fraction(-m, 2), Fraction(1, 2), m * (m + 4))
    point = FixedPoint(m, w)
    if not point.is_root() or surd_sign(w) <= 0 or surd_sign(w - 1) >= 0:
        raise DomainError(f"fixed point check failed for m={m}")
    return point


def _sample_step(s: float, rng: np.random.Generator, force_digit: Optional[int], ctx: ThetaContext) -> int:
    if force_digit is not None:
        return force_digit
    return sample_digit(s, rng.random(), ctx)


def simulate_chain(
    a: State,
    n: int,
    seed: int,
    ctx: ThetaContext,
    force_digit: Optional[int] = None,
    exact: bool = False,
) -> ChainTrajectory:
    """Run the chain from s_0 = a for n steps.

    With ``exact`` the states are SurdNumbers and the digits are drawn from
    their float images; ``force_digit`` replaces every draw by that digit.
    """
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    if force_digit is not None:
        _check_digit(force_digit, ctx)
    if exact:
        if not isinstance(a, SurdNumber):
            raise DomainError("exact chains need a SurdNumber start")
        ctx.check_domain(a, "a")
        state: State = a
    else:
        state = float(a)
        ctx.check_float_domain(state, "a")
    rng = make_rng(seed)
    states = [ChainState(state)]
    digits: list[int] = []
    for _ in range(n):
        digit = _sample_step(float(state), rng, force_digit, ctx)
        state = u_map(digit, state, ctx)
        states.append(ChainState(state))
        digits.append(digit)
    _LOGGER.debug("simulate_chain: a=%s n=%d seed=%d exact=%s", a, n, seed, exact)
    return ChainTrajectory(a, tuple(states), tuple(digits))


def simulate_chains(
    a: float, n: int, samples: int, seed: int, ctx: ThetaContext, task: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """``samples`` independent chains from a; returns (states (n+1, samples), digits (n, samples))."""
    if n < 0 or samples < 1:
        raise DomainError(f"need n ≥ 0 and samples ≥ 1, got n={n} samples={samples}")
    ctx.check_float_domain(float(a), "a")
    rng = make_rng(seed, task)
    states = np.empty((n + 1, samples))
    digits = np.empty((n, samples))
    states[0] = float(a)
    th = ctx.theta_f
    for k in range(n):
        d = sample_digits(states[k], rng.random(samples), ctx)
        digits[k] = d
        states[k + 1] = np.minimum(1.0 / (states[k] + d * th), th)
    return states, digits


def transition_expectation(
    f: Callable[[np.ndarray], np.ndarray], s: float, ctx: ThetaContext, samples: int, seed: int
) -> tuple[float, float]:
    """Monte-Carlo E[f(s_1) | s_0 = s] and its standard error."""
    states, _ = simulate_chains(s, 1, samples, seed, ctx)
    values = np.asarray(f(states[1]), dtype=np.float64)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))
