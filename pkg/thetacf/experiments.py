"""Monte-Carlo experiments: Gauss-Kuzmin errors, the Lévy rate, Khinchin means and digit laws.

Every sampling loop is split into fixed-size tasks. Task k draws from
``make_rng(seed, k)`` and the per-task partial results are reduced in task
order, so the output does not depend on the number of threads.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, TypeVar

import mpmath
import numpy as np

from .chain import digit_law, make_rng
from .const import (
    DEFAULT_DIGIT_TABLE,
    DEFAULT_MC_PRECISION,
    DOUBLE_DOUBLE_PRECISION,
    FLOAT64_PRECISION,
    LEVY_RESCALE_EVERY,
    MC_CHUNK_SIZE,
    MIN_DIGIT_SAMPLES,
    MIN_GK_SAMPLES,
    MIN_LEVY_N,
    MIN_LEVY_SAMPLES,
)
from .errors import DomainError, NumericError
from .expansion import gauss_map_array, gauss_map_dd
from .measures import MeasureKind, gamma_cdf, gamma_inverse_cdf, stationary_digit_law
from .numerics import ThetaContext, to_float
from .operator import fit_geometric
from .report import ExperimentReport

_LOGGER = logging.getLogger(__name__)

__all__ = [
    "beta_integrals",
    "digit_frequency",
    "fit_geometric",
    "gk_error_curve",
    "khinchin_mean",
    "khinchin_seed_sweep",
    "levy_beta",
    "levy_from_digits",
    "levy_samples",
    "OrbitBatch",
]

T = TypeVar("T")

GK_COLUMNS = ["n", "x", "empirical", "limit", "error", "stderr"]
DIGIT_COLUMNS = ["i", "first_freq", "first_law", "nth_freq", "stationary_law", "first_stderr", "nth_stderr"]


def _task_sizes(total: int) -> list[int]:
    full, rest = divmod(total, MC_CHUNK_SIZE)
    return [MC_CHUNK_SIZE] * full + ([rest] if rest else [])


def _run_tasks(func: Callable[[int, int], T], sizes: Sequence[int], threads: int) -> list[T]:
    """func(task, size) for every task, results in task order."""
    if threads <= 1 or len(sizes) == 1:
        return [func(k, size) for k, size in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, range(len(sizes)), sizes))


def _below(theta: float) -> float:
    return float(np.nextafter(theta, 0.0))


def _check_orbit_precision(precision: int) -> None:
    if not FLOAT64_PRECISION <= precision <= DOUBLE_DOUBLE_PRECISION:
        raise DomainError(
            f"orbit precision must lie in [{FLOAT64_PRECISION}, {DOUBLE_DOUBLE_PRECISION}] bits, got {precision}"
        )


class OrbitBatch:
    """A batch of T_θ orbits advanced together.

    Up to 53 bits the points are plain float64; up to 106 bits they carry a
    double-double low part. ``x`` is always the float64 value of the points.
    """

    def __init__(self, x0: np.ndarray, ctx: ThetaContext, precision: int = DEFAULT_MC_PRECISION) -> None:
        _check_orbit_precision(precision)
        self.ctx = ctx
        self.x = np.minimum(np.asarray(x0, dtype=np.float64), _below(ctx.theta_f))
        self.lo = np.zeros_like(self.x) if precision > FLOAT64_PRECISION else None

    def step(self) -> np.ndarray:
        """Move every orbit one step; returns the digits read off."""
        if self.lo is None:
            out, digit = gauss_map_array(self.x, self.ctx.theta_f)
            self.x = np.minimum(out, _below(self.ctx.theta_f))
        else:
            self.x, self.lo, digit = gauss_map_dd(self.x, self.lo, self.ctx)
        return digit

    def resample_zeros(self, rng: np.random.Generator, what: str) -> None:
        zero = self.x == 0.0
        if not zero.any():
            return
        _LOGGER.warning("%s: resampling %d orbit(s) that fell onto 0", what, int(zero.sum()))
        self.x = self.x.copy()
        self.x[zero] = np.minimum(gamma_inverse_cdf(rng.random(int(zero.sum())), self.ctx), _below(self.ctx.theta_f))
        if self.lo is not None:
            self.lo = np.where(zero, 0.0, self.lo)


def _orbit_mp(x0: np.ndarray, n_max: int, ctx: ThetaContext, precision: int) -> np.ndarray:
    """Orbits of T_θ in mpmath at ``precision`` bits; shape (n_max + 1, size)."""
    out = np.empty((n_max + 1, x0.size))
    with mpmath.workprec(precision):
        theta = to_float(ctx.theta, precision)
        for k, start in enumerate(x0):
            x = mpmath.mpf(float(start))
            out[0, k] = float(x)
            for n in range(1, n_max + 1):
                if x:
                    inv = 1 / x
                    x = inv - theta * mpmath.floor(inv / theta)
                out[n, k] = float(x)
    return np.minimum(out, _below(ctx.theta_f))


def _gk_counts(
    mu: MeasureKind,
    n_max: int,
    size: int,
    grid: np.ndarray,
    rng: np.random.Generator,
    ctx: ThetaContext,
    precision: int,
) -> np.ndarray:
    counts = np.empty((n_max + 1, grid.size), dtype=np.int64)
    x = np.minimum(mu.sample(size, rng, ctx), _below(ctx.theta_f))
    if precision > DOUBLE_DOUBLE_PRECISION:
        orbit = _orbit_mp(x, n_max, ctx, precision)
        batch = None
    else:
        orbit = None
        batch = OrbitBatch(x, ctx, precision)
    for n in range(n_max + 1):
        if orbit is not None:
            x = orbit[n]
        else:
            if n:
                batch.step()
            x = batch.x
        counts[n] = np.searchsorted(np.sort(x), grid, side="left")
    zeros = int(np.count_nonzero(x == 0.0))
    if zeros:
        _LOGGER.warning("gk: %d of %d orbits fell onto 0 (rational start points)", zeros, size)
    return counts


def gk_error_curve(
    mu: MeasureKind,
    n_max: int,
    samples: int,
    x_grid: Sequence[float],
    seed: int,
    ctx: ThetaContext,
    threads: int = 1,
    precision: int = DEFAULT_MC_PRECISION,
    meta: Optional[dict[str, str]] = None,
) -> ExperimentReport:
    """Empirical μ(T_θⁿ < x) against the limit γ_θ([0, x)) for n = 0…n_max.

    Orbits run in double-double by default; ``precision=53`` selects plain
    float64 and anything above 106 bits the (slow) mpmath path.
    """
    if precision < FLOAT64_PRECISION:
        raise DomainError(f"precision must be at least {FLOAT64_PRECISION} bits, got {precision}")
    if samples < MIN_GK_SAMPLES:
        raise DomainError(f"samples must be at least {MIN_GK_SAMPLES}, got {samples}")
    if n_max < 0:
        raise DomainError(f"n_max must be non-negative, got {n_max}")
    grid = np.asarray(x_grid, dtype=np.float64)
    limit = np.asarray(gamma_cdf(grid, ctx))
    grid = np.minimum(grid, ctx.theta_f)

    def task(k: int, size: int) -> np.ndarray:
        return _gk_counts(mu, n_max, size, grid, make_rng(seed, k), ctx, precision)

    parts = _run_tasks(task, _task_sizes(samples), threads)
    counts = np.zeros_like(parts[0])
    for part in parts:
        counts += part
    empirical = counts / samples
    # x = θ: every orbit point lies below θ
    empirical[:, grid >= ctx.theta_f] = 1.0
    error = empirical - limit
    stderr = np.sqrt(limit * (1.0 - limit) / samples)

    report = ExperimentReport(
        command="gk",
        meta=meta if meta is not None else {"m": str(ctx.m), "seed": str(seed), "samples": str(samples)},
        columns=list(GK_COLUMNS),
    )
    for n in range(n_max + 1):
        for j, x in enumerate(grid):
            report.add_row(n, float(x), float(empirical[n, j]), float(limit[j]), float(error[n, j]), float(stderr[j]))

    sup_error = np.max(np.abs(error), axis=1)
    noise = 3.0 * float(stderr.max())
    decaying = []
    for value in sup_error[1:]:
        if value <= noise:
            break
        decaying.append(float(value))
    q_hat, k_hat = fit_geometric(decaying, start=1)
    positive = limit > 0
    alpha = []
    for n in range(n_max + 1):
        if q_hat > 0 and positive.any():
            alpha.append(float(np.max(np.abs(error[n, positive]) / (q_hat**n * limit[positive]))))
        else:
            alpha.append(None)
    report.summary.update(
        {
            "measure": mu.label(),
            "q_hat": q_hat,
            "k_hat": k_hat,
            "fit_points": len(decaying),
            "mc_sigma": float(stderr.max()),
            "sup_error": [float(v) for v in sup_error],
            "alpha_max": alpha,
        }
    )
    _LOGGER.info(
        "gk: m=%d measure=%s samples=%d sup|e_%d|=%.4g q_hat=%.4f", ctx.m, mu.label(), samples, n_max,
        sup_error[-1], q_hat,
    )
    return report


def levy_from_digits(digits: Sequence[int], ctx: ThetaContext) -> float:
    """(1/n) log q_n for the given digits, renormalized every few steps."""
    if not digits:
        raise DomainError("levy_from_digits needs at least one digit")
    th = ctx.theta_f
    q_prev, q = 0.0, 1.0
    log_scale = 0.0
    for k, a in enumerate(digits, start=1):
        if a < ctx.m:
            raise DomainError(f"digit {a} is below m={ctx.m}")
        q_prev, q = q, a * th * q + q_prev
        if k % LEVY_RESCALE_EVERY == 0:
            log_scale += math.log(q)
            q_prev, q = q_prev / q, 1.0
    return (log_scale + math.log(q)) / len(digits)


def _levy_task(n: int, size: int, rng: np.random.Generator, ctx: ThetaContext, precision: int) -> np.ndarray:
    th = ctx.theta_f
    orbits = OrbitBatch(gamma_inverse_cdf(rng.random(size), ctx), ctx, precision)
    q_prev = np.zeros(size)
    q = np.ones(size)
    log_scale = np.zeros(size)
    for k in range(1, n + 1):
        orbits.resample_zeros(rng, "levy")
        digit = orbits.step()
        q_prev, q = q, digit * th * q + q_prev
        if k % LEVY_RESCALE_EVERY == 0:
            log_scale += np.log(q)
            q_prev = q_prev / q
            q = np.ones(size)
    values = (log_scale + np.log(q)) / n
    if not np.all(np.isfinite(values)):
        raise NumericError("q_n overflowed despite renormalization")
    return values


def levy_samples(
    samples: int, n: int, seed: int, ctx: ThetaContext, threads: int = 1, precision: int = DEFAULT_MC_PRECISION
) -> np.ndarray:
    """Per-start values of (1/n) log q_n(x_0) for x_0 ~ γ_θ."""
    if n < MIN_LEVY_N or samples < MIN_LEVY_SAMPLES:
        raise DomainError(f"need n ≥ {MIN_LEVY_N} and samples ≥ {MIN_LEVY_SAMPLES}, got n={n} samples={samples}")
    _check_orbit_precision(precision)
    parts = _run_tasks(
        lambda k, size: _levy_task(n, size, make_rng(seed, k), ctx, precision), _task_sizes(samples), threads
    )
    return np.concatenate(parts)


def levy_beta(
    samples: int, n: int, seed: int, ctx: ThetaContext, threads: int = 1, precision: int = DEFAULT_MC_PRECISION
) -> tuple[float, float]:
    """(β̂, standard error) of the growth rate of log q_n."""
    values = levy_samples(samples, n, seed, ctx, threads, precision)
    beta_hat = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(values.size))
    _LOGGER.info("levy: m=%d beta_hat=%.6f stderr=%.2e", ctx.m, beta_hat, stderr)
    return beta_hat, stderr


def beta_integrals(ctx: ThetaContext) -> dict[str, float]:
    """The integral I = ∫_0^θ θ log x/(1 + xθ) dx and two normalizations of it.

    ``printed`` is I/(1 + θ²), which is negative; ``corrected`` is
    −I/log(1 + θ²), the γ_θ-average of −log x. Neither is asserted against
    the simulated rate.
    """
    prec = ctx.precision
    with mpmath.workprec(prec):
        theta = to_float(ctx.theta, prec)
        integral = mpmath.quad(lambda t: theta * mpmath.log(t) / (1 + t * theta), [0, theta])
        printed = integral / (1 + theta**2)
        corrected = -integral / ctx.log_norm
    return {"integral": float(integral), "printed": float(printed), "corrected": float(corrected)}


def khinchin_mean(
    samples: int,
    checkpoints: Sequence[int],
    seed: int,
    ctx: ThetaContext,
    task: int = 0,
    precision: int = DEFAULT_MC_PRECISION,
) -> list[tuple[int, float]]:
    """Average over starts x_0 ~ λ_θ of (a_1 + … + a_n)/n at each checkpoint."""
    points = list(checkpoints)
    if not points or points[0] < 1 or any(b <= a for a, b in zip(points, points[1:])):
        raise DomainError(f"checkpoints must be positive and increasing, got {points}")
    if samples < 1:
        raise DomainError(f"samples must be positive, got {samples}")
    rng = make_rng(seed, task)
    orbits = OrbitBatch(rng.random(samples) * ctx.theta_f, ctx, precision)
    total = np.zeros(samples)
    table: list[tuple[int, float]] = []
    wanted = iter(points)
    target = next(wanted)
    for n in range(1, points[-1] + 1):
        orbits.resample_zeros(rng, "khinchin")
        total += orbits.step()
        if n == target:
            table.append((n, float(np.mean(total / n))))
            target = next(wanted, 0)
    return table


def khinchin_seed_sweep(
    seeds: Sequence[int], samples: int, checkpoints: Sequence[int], ctx: ThetaContext
) -> float:
    """Fraction of seeds whose mean digit average at the last checkpoint exceeds the first."""
    if not seeds:
        raise DomainError("khinchin_seed_sweep needs at least one seed")
    grew = 0
    for seed in seeds:
        table = khinchin_mean(samples, checkpoints, seed, ctx)
        grew += table[-1][1] > table[0][1]
    return grew / len(seeds)


def digit_frequency(
    samples: int,
    n: int,
    seed: int,
    ctx: ThetaContext,
    table: int = DEFAULT_DIGIT_TABLE,
    threads: int = 1,
    meta: Optional[dict[str, str]] = None,
    precision: int = DEFAULT_MC_PRECISION,
) -> ExperimentReport:
    """First and n-th digit frequencies for x_0 ~ λ_θ against their closed forms."""
    if samples < MIN_DIGIT_SAMPLES:
        raise DomainError(f"samples must be at least {MIN_DIGIT_SAMPLES}, got {samples}")
    if n < 1:
        raise DomainError(f"n must be at least 1, got {n}")
    _check_orbit_precision(precision)
    digits = np.arange(ctx.m, ctx.m + table)

    def task(k: int, size: int) -> np.ndarray:
        rng = make_rng(seed, k)
        orbits = OrbitBatch(rng.random(size) * ctx.theta_f, ctx, precision)
        counts = np.zeros((2, digits.size), dtype=np.int64)
        for step in range(1, n + 1):
            orbits.resample_zeros(rng, "digits")
            digit = orbits.step()
            if step == 1:
                counts[0] = np.bincount(np.searchsorted(digits, digit[digit <= digits[-1]]), minlength=digits.size)
            if step == n:
                counts[1] = np.bincount(np.searchsorted(digits, digit[digit <= digits[-1]]), minlength=digits.size)
        return counts

    parts = _run_tasks(task, _task_sizes(samples), threads)
    counts = np.zeros_like(parts[0])
    for part in parts:
        counts += part
    first = counts[0] / samples
    nth = counts[1] / samples
    first_law = np.asarray(digit_law(digits, ctx))
    stationary = np.asarray(stationary_digit_law(digits, ctx))

    report = ExperimentReport(
        command="digits",
        meta=meta if meta is not None else {"m": str(ctx.m), "seed": str(seed), "samples": str(samples)},
        columns=list(DIGIT_COLUMNS),
    )
    for k, i in enumerate(digits):
        report.add_row(
            int(i),
            float(first[k]),
            float(first_law[k]),
            float(nth[k]),
            float(stationary[k]),
            float(math.sqrt(first_law[k] * (1 - first_law[k]) / samples)),
            float(math.sqrt(stationary[k] * (1 - stationary[k]) / samples)),
        )
    last = int(digits[-1])
    report.summary.update(
        {
            "n": n,
            "first_tail": float(1.0 - first.sum()),
            "first_tail_law": ctx.m / (last + 1),
            "nth_tail": float(1.0 - nth.sum()),
            "stationary_tail_law": math.log1p(1.0 / (last + 1)) / ctx.log_norm_f,
        }
    )
    return report
