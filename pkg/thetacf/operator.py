"""The Perron–Frobenius operator of T_θ under γ_θ on a uniform grid.

    Uf(x) = Σ_{i≥m} P_i(x) f(u_i(x))

Functions are piecewise linear between the nodes, so U is a matrix acting on
nodal values. The series is summed term by term up to an index I, where the
branch images enter the first grid cell or the remaining mass drops to
``tail_eps``, whichever comes first. The rest keeps its mass and first moment

    Σ_{i>I} P_i(x)        = (xθ + 1)/θ · 1/(x + (I + 1)θ)
    Σ_{i>I} P_i(x) u_i(x) = (xθ + 1)/θ³ · (ψ₁(K) − 1/K),   K = I + 1 + x/θ

and is placed at its mean image. Inside the first cell f is linear, so there
the closure is exact.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import digamma, polygamma

from .const import (
    DECAY_FLOOR_FACTOR,
    DEFAULT_GRID_SIZE,
    DEFAULT_MAX_TERMS,
    DEFAULT_TAIL_EPS,
    DENSITY_NORMALIZATION_TOL,
    MAX_GRID_SIZE,
    MIN_DECAY_ITERATIONS,
    MIN_GRID_SIZE,
    NORM_LIPSCHITZ,
    NORM_SUP,
    NORMS,
    OPERATOR_ROW_CHUNK,
    POWER_ITERATION_MAX,
    POWER_ITERATION_TOL,
)
from .errors import DomainError, NumericError, ValidationError
from .measures import gamma_cdf
from .numerics import ThetaContext

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on [0, θ], linearly interpolated in between."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < MIN_GRID_SIZE or nodes.shape != values.shape:
            raise ValidationError("grid function needs matching 1-d nodes and values with at least 2 points")
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise ValidationError("grid nodes must start at 0 and increase strictly")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, func: Callable[[np.ndarray], np.ndarray], size: int, ctx: ThetaContext) -> GridFunction:
        nodes = uniform_nodes(size, ctx)
        values = np.broadcast_to(np.asarray(func(nodes), dtype=np.float64), nodes.shape)
        return cls(nodes, values.copy())

    @classmethod
    def constant(cls, value: float, size: int, ctx: ThetaContext) -> GridFunction:
        return cls.from_callable(lambda x: np.full_like(x, value), size, ctx)

    @property
    def upper(self) -> float:
        return float(self.nodes[-1])

    def __call__(self, x):
        arr = np.asarray(x, dtype=np.float64)
        if np.any(~(arr >= 0.0)) or np.any(arr > self.upper * (1 + 4e-16)):
            raise DomainError(f"grid function evaluated outside [0, {self.upper!r}]")
        out = np.interp(arr, self.nodes, self.values)
        return float(out) if out.ndim == 0 else out

    def resample(self, nodes: np.ndarray) -> np.ndarray:
        if nodes.shape == self.nodes.shape and np.array_equal(nodes, self.nodes):
            return self.values
        return np.asarray(self(nodes))

    def integral(self) -> float:
        """∫ f dx over [0, θ] (exact for the interpolant)."""
        return float(np.trapezoid(self.values, self.nodes))

    def cumulative(self, x):
        """∫_0^x f dt for the interpolant, elementwise in x."""
        arr = np.asarray(x, dtype=np.float64)
        steps = np.diff(self.nodes)
        at_nodes = np.concatenate(([0.0], np.cumsum(0.5 * steps * (self.values[1:] + self.values[:-1]))))
        cell = np.clip(np.searchsorted(self.nodes, arr, side="right") - 1, 0, self.nodes.size - 2)
        left = self.nodes[cell]
        value_at = np.interp(arr, self.nodes, self.values)
        out = at_nodes[cell] + 0.5 * (arr - left) * (self.values[cell] + value_at)
        return float(out) if out.ndim == 0 else out

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def lipschitz(self) -> float:
        """Largest absolute divided difference over adjacent nodes."""
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.nodes))))


@dataclass(frozen=True)
class OperatorConfig:
    grid_size: int = DEFAULT_GRID_SIZE
    tail_eps: float = DEFAULT_TAIL_EPS
    norm: str = NORM_SUP

    def __post_init__(self) -> None:
        if not MIN_GRID_SIZE <= self.grid_size <= MAX_GRID_SIZE:
            raise ValidationError(f"grid_size must lie in [{MIN_GRID_SIZE}, {MAX_GRID_SIZE}], got {self.grid_size}")
        if not self.tail_eps > 0:
            raise ValidationError(f"tail_eps must be positive, got {self.tail_eps}")
        if self.norm not in NORMS:
            raise ValidationError(f"norm must be one of {NORMS}, got {self.norm!r}")


def uniform_nodes(size: int, ctx: ThetaContext) -> np.ndarray:
    nodes = np.linspace(0.0, ctx.theta_f, size)
    nodes[-1] = ctx.theta_f
    return nodes


def invariant_density(ctx: ThetaContext, cfg: OperatorConfig) -> GridFunction:
    """ρ_θ(x) = 1/(log(1 + θ²)(x + mθ)), the γ_θ density with respect to dx."""
    m_theta = ctx.m * ctx.theta_f
    return GridFunction.from_callable(lambda x: 1.0 / (ctx.log_norm_f * (x + m_theta)), cfg.grid_size, ctx)


def _explicit_last(x: np.ndarray, first_cell: float, ctx: ThetaContext, tail_eps: float = 0.0) -> np.ndarray:
    """Largest i summed term by term.

    That is the last branch whose image u_i(x) may still lie beyond the first
    cell, or an earlier one once the remaining mass (xθ + 1)/(θ(x + (i + 1)θ))
    is at most ``tail_eps``.
    """
    th = ctx.theta_f
    last = np.ceil((1.0 / first_cell - x) / th) - 1.0
    if tail_eps > 0.0:
        last = np.minimum(last, np.ceil(((x * th + 1.0) / (th * tail_eps) - x) / th) - 1.0)
    return np.clip(last, ctx.m - 1, ctx.m - 1 + DEFAULT_MAX_TERMS).astype(np.int64)


def _rows(xs: np.ndarray, nodes: np.ndarray, ctx: ThetaContext, tail_eps: float) -> np.ndarray:
    size = nodes.size
    th = ctx.theta_f
    last = _explicit_last(xs, nodes[1], ctx, tail_eps)
    block = np.zeros((xs.size, size))

    top = int(last.max())
    if top >= ctx.m:
        i = np.arange(ctx.m, top + 1, dtype=np.float64)
        x = xs[:, None]
        y = 1.0 / (x + i * th)
        prob = (x * th + 1.0) / ((x + i * th) * (x + (i + 1.0) * th))
        prob = np.where(i[None, :] <= last[:, None], prob, 0.0)
        cell = np.clip(np.searchsorted(nodes, y, side="right") - 1, 0, size - 2)
        frac = (y - nodes[cell]) / (nodes[cell + 1] - nodes[cell])
        flat = (np.arange(xs.size)[:, None] * size + cell).ravel()
        length = xs.size * size
        block += np.bincount(flat, weights=(prob * (1.0 - frac)).ravel(), minlength=length).reshape(block.shape)
        block += np.bincount(flat + 1, weights=(prob * frac).ravel(), minlength=length).reshape(block.shape)

    # the tail i > last goes in whole at its mean image, keeping mass and first moment
    k = last + 1.0 + xs / th
    scale = xs * th + 1.0
    tail0 = scale / (th * (xs + (last + 1.0) * th))
    tail1 = scale / th**3 * (polygamma(1, k) - 1.0 / k)
    mean = np.clip(tail1 / tail0, 0.0, nodes[-1])
    cell = np.clip(np.searchsorted(nodes, mean, side="right") - 1, 0, size - 2)
    frac = (mean - nodes[cell]) / (nodes[cell + 1] - nodes[cell])
    rows = np.arange(xs.size)
    block[rows, cell] += tail0 * (1.0 - frac)
    block[rows, cell + 1] += tail0 * frac
    return block


@dataclass(frozen=True, eq=False)
class TransferOperator:
    """Collocation matrix of U on a uniform grid."""

    ctx: ThetaContext
    cfg: OperatorConfig
    nodes: np.ndarray
    matrix: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ values

    def density(self) -> np.ndarray:
        return invariant_density(self.ctx, self.cfg).values


def assemble_operator(ctx: ThetaContext, cfg: OperatorConfig, threads: int = 1) -> TransferOperator:
    """Build the collocation matrix, rows split over ``threads`` workers (uncached)."""
    nodes = uniform_nodes(cfg.grid_size, ctx)
    chunks = [nodes[k:k + OPERATOR_ROW_CHUNK] for k in range(0, nodes.size, OPERATOR_ROW_CHUNK)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        blocks = list(pool.map(lambda xs: _rows(xs, nodes, ctx, cfg.tail_eps), chunks))
    matrix = np.vstack(blocks)
    if not np.all(np.isfinite(matrix)):
        raise NumericError("transfer matrix has non-finite entries")
    if np.any(_explicit_last(nodes, nodes[1], ctx, cfg.tail_eps) >= ctx.m - 1 + DEFAULT_MAX_TERMS):
        _LOGGER.warning("operator: explicit series capped at %d terms for m=%d", DEFAULT_MAX_TERMS, ctx.m)
    _LOGGER.debug(
        "operator built: m=%d N=%d max row-sum error=%.3e",
        ctx.m,
        cfg.grid_size,
        float(np.max(np.abs(matrix.sum(axis=1) - 1.0))),
    )
    return TransferOperator(ctx, cfg, nodes, matrix)


@lru_cache(maxsize=4)
def _operator_slot(ctx: ThetaContext, cfg: OperatorConfig) -> list[TransferOperator]:
    return []


def build_operator(ctx: ThetaContext, cfg: OperatorConfig, threads: int = 1) -> TransferOperator:
    """Cached :func:`assemble_operator`; the matrix does not depend on ``threads``, so neither does the key."""
    slot = _operator_slot(ctx, cfg)
    if not slot:
        slot.append(assemble_operator(ctx, cfg, threads))
    return slot[0]


def apply_U(f: GridFunction, cfg: OperatorConfig, ctx: ThetaContext) -> GridFunction:
    op = build_operator(ctx, cfg)
    return GridFunction(op.nodes, op.apply(f.resample(op.nodes)))


def transfer_density(h: GridFunction, cfg: OperatorConfig, ctx: ThetaContext) -> GridFunction:
    """The operator on Lebesgue densities, h ↦ ρ_θ·U(h/ρ_θ); ρ_θ is fixed."""
    op = build_operator(ctx, cfg)
    rho = op.density()
    return GridFunction(op.nodes, rho * op.apply(h.resample(op.nodes) / rho))


def fixed_point_residuals(cfg: OperatorConfig, ctx: ThetaContext) -> tuple[float, float]:
    """(sup|U1 − 1|, sup|Lρ_θ − ρ_θ|)."""
    op = build_operator(ctx, cfg)
    one = np.ones(op.nodes.size)
    rho = invariant_density(ctx, cfg)
    return (
        float(np.max(np.abs(op.apply(one) - 1.0))),
        float(np.max(np.abs(transfer_density(rho, cfg, ctx).values - rho.values))),
    )


def invariant_weights(op: TransferOperator) -> np.ndarray:
    """Left fixed vector w of the collocation matrix, normalized to w·1 = 1.

    w·f is the discrete counterpart of ∫ f dγ_θ and is conserved exactly by
    the iteration, so it is the limit the residuals decay to.
    """
    rho = op.density()
    w = np.empty_like(rho)
    # trapezoid weights of γ_θ as the starting guess
    steps = np.diff(op.nodes)
    w[:] = 0.0
    w[:-1] += 0.5 * steps * rho[:-1]
    w[1:] += 0.5 * steps * rho[1:]
    w /= w.sum()
    for k in range(POWER_ITERATION_MAX):
        nxt = op.matrix.T @ w
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - w)) < POWER_ITERATION_TOL:
            _LOGGER.debug("invariant_weights: converged after %d iterations", k + 1)
            return nxt
        w = nxt
    _LOGGER.warning("invariant_weights: no convergence after %d iterations", POWER_ITERATION_MAX)
    return w


def _check_density(h: GridFunction, ctx: ThetaContext) -> None:
    if abs(h.upper - ctx.theta_f) > 4e-16 * ctx.theta_f:
        raise ValidationError("density grid must span [0, θ]")
    mass = h.integral() / ctx.theta_f
    if abs(mass - 1.0) > DENSITY_NORMALIZATION_TOL:
        raise ValidationError(f"h is not a probability density w.r.t. λ_θ (mass {mass:.9g})")


def start_function(h: GridFunction, nodes: np.ndarray, ctx: ThetaContext) -> np.ndarray:
    """f = log(1 + θ²)(xθ + 1)h/θ², the dμ/dγ_θ of μ = h·λ_θ."""
    th = ctx.theta_f
    return ctx.log_norm_f * (nodes * th + 1.0) * h.resample(nodes) / th**2


def _gamma_antiderivative(nodes: np.ndarray, values: np.ndarray, t: np.ndarray, ctx: ThetaContext) -> np.ndarray:
    """∫_0^t g dγ_θ for the piecewise-linear g, exact on every cell."""
    th = ctx.theta_f
    c = ctx.log_norm_f
    left, right = nodes[:-1], nodes[1:]
    slope = np.diff(values) / np.diff(nodes)

    def piece(start, stop, value_at_start, cell_slope):
        # ∫ (v + s(τ − start)) θ/(c(1 + θτ)) dτ over [start, stop]
        dlog = np.log1p(th * (stop - start) / (1.0 + th * start))
        intercept = value_at_start - cell_slope * start
        return (intercept * dlog + cell_slope * ((stop - start) - dlog / th)) / c

    full = piece(left, right, values[:-1], slope)
    at_nodes = np.concatenate(([0.0], np.cumsum(full)))
    cell = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, nodes.size - 2)
    return at_nodes[cell] + piece(nodes[cell], t, values[cell], slope[cell])


def _pullback_cdf(nodes: np.ndarray, values: np.ndarray, x: np.ndarray, ctx: ThetaContext) -> np.ndarray:
    """∫_0^x Ug dγ_θ = Σ_i ∫_{u_i([0, x))} g dγ_θ, with the first-cell tail in closed form."""
    th = ctx.theta_f
    c = ctx.log_norm_f
    first_cell = nodes[1]
    last = int(_explicit_last(np.zeros(1), first_cell, ctx)[0])
    out = np.zeros(x.shape)
    if last >= ctx.m:
        i = np.arange(ctx.m, last + 1, dtype=np.float64)
        upper = _gamma_antiderivative(nodes, values, np.minimum(1.0 / (i * th), th), ctx)
        for k, xk in enumerate(x.ravel()):
            lower = _gamma_antiderivative(nodes, values, 1.0 / (xk + i * th), ctx)
            out.flat[k] = math.fsum((upper - lower).tolist())
    y = x / th
    n0 = last + 1.0
    slope = (values[1] - values[0]) / first_cell
    log_tail = np.log1p(y / n0)
    mean_tail = (digamma(n0 + y) - digamma(n0)) / th
    out += (values[0] * log_tail + slope * (mean_tail - log_tail / th)) / c
    return out


class Pushforward:
    """Iterates U on dμ/dγ_θ and reports μ(T_θ⁻ⁿ[0, x))."""

    def __init__(self, h: GridFunction, cfg: OperatorConfig, ctx: ThetaContext, threads: int = 1) -> None:
        _check_density(h, ctx)
        self._ctx = ctx
        self._op = build_operator(ctx, cfg, threads)
        self._iterates = [start_function(h, self._op.nodes, ctx)]

    def iterate(self, n: int) -> np.ndarray:
        if n < 0:
            raise DomainError(f"n must be non-negative, got {n}")
        while len(self._iterates) <= n:
            self._iterates.append(self._op.apply(self._iterates[-1]))
        return self._iterates[n]

    def cdf(self, n: int, x):
        arr = np.asarray(x, dtype=np.float64)
        self._ctx.check_float_domain(float(np.max(arr, initial=0.0)))
        if np.any(arr < 0):
            raise DomainError("x must be non-negative")
        arr = np.minimum(arr, self._ctx.theta_f)
        if n == 0:
            out = _gamma_antiderivative(self._op.nodes, self.iterate(0), arr.ravel(), self._ctx)
        else:
            out = _pullback_cdf(self._op.nodes, self.iterate(n - 1), arr.ravel(), self._ctx)
        out = out.reshape(arr.shape)
        return float(out) if out.ndim == 0 else out


def pushforward_cdf(h: GridFunction, n: int, x, cfg: OperatorConfig, ctx: ThetaContext):
    """μ(T_θ⁻ⁿ[0, x)) for μ with density h with respect to λ_θ."""
    return Pushforward(h, cfg, ctx).cdf(n, x)


def gk_operator_curve(
    h: GridFunction, n_max: int, x_grid: Sequence[float], cfg: OperatorConfig, ctx: ThetaContext, threads: int = 1
) -> np.ndarray:
    """e_n(x) = μ(T_θ⁻ⁿ[0, x)) − γ_θ([0, x)) for n = 0…n_max; shape (n_max + 1, len(x_grid))."""
    xs = np.asarray(x_grid, dtype=np.float64)
    push = Pushforward(h, cfg, ctx, threads)
    target = np.asarray(gamma_cdf(xs, ctx))
    return np.vstack([np.asarray(push.cdf(n, xs)) - target for n in range(n_max + 1)])


def fit_geometric(values: Sequence[float], start: int = 1) -> tuple[float, float]:
    """Least-squares fit of values[k] ≈ K·q^(start + k) on log values; (q, K).

    Non-positive entries are ignored; fewer than two usable points give (0, 0).
    """
    arr = np.asarray(values, dtype=np.float64)
    index = np.arange(start, start + arr.size, dtype=np.float64)
    keep = np.isfinite(arr) & (arr > 0)
    if keep.sum() < 2:
        return 0.0, 0.0
    slope, intercept = np.polyfit(index[keep], np.log(arr[keep]), 1)
    return float(np.exp(slope)), float(np.exp(intercept))


def _norm(values: np.ndarray, nodes: np.ndarray, norm: str) -> float:
    sup = float(np.max(np.abs(values)))
    if norm == NORM_LIPSCHITZ:
        return sup + float(np.max(np.abs(np.diff(values) / np.diff(nodes))))
    return sup


def estimate_decay_rate(
    h: GridFunction, n_max: int, cfg: OperatorConfig, ctx: ThetaContext, op: Optional[TransferOperator] = None
) -> tuple[float, list[float]]:
    """Geometric rate q̂ of r_n = ‖Uⁿf − U^∞f‖ for the start f built from h.

    The residuals stop once they fall below 1e2 machine epsilon; q̂ is fitted
    on the last half of the residuals collected and is 0 when fewer than two
    remain.
    """
    if n_max < MIN_DECAY_ITERATIONS:
        raise DomainError(f"n_max must be at least {MIN_DECAY_ITERATIONS}, got {n_max}")
    _check_density(h, ctx)
    op = op or build_operator(ctx, cfg)
    f = start_function(h, op.nodes, ctx)
    limit = float(invariant_weights(op) @ f)
    floor = DECAY_FLOOR_FACTOR * np.finfo(np.float64).eps * max(1.0, abs(limit))
    residuals: list[float] = []
    for n in range(1, n_max + 1):
        f = op.apply(f)
        r = _norm(f - limit, op.nodes, cfg.norm)
        if r < floor:
            _LOGGER.debug("estimate_decay_rate: residual %.3e below floor at n=%d", r, n)
            break
        residuals.append(r)
    half = len(residuals) // 2
    q_hat, _ = fit_geometric(residuals[half:], start=half + 1)
    _LOGGER.info(
        "estimate_decay_rate: m=%d norm=%s q_hat=%.6f over %d residuals", ctx.m, cfg.norm, q_hat, len(residuals)
    )
    return q_hat, residuals
