"""Command-line front end.

Every command validates its arguments into a RunConfig, runs the library and
writes one ExperimentReport (CSV or JSON) whose metadata is that RunConfig.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import Callable, Optional

import mpmath
import numpy as np

from . import __version__
from .chain import rscc_fixed_point, simulate_chain
from .config import RunConfig
from .const import (
    COMMANDS,
    CONF_CHECKPOINTS,
    CONF_DEPTH,
    CONF_FIXED_POINT_CHECK,
    CONF_FORCE_DIGIT,
    CONF_GRID,
    CONF_MAX_EXCESS,
    CONF_MC_PRECISION,
    CONF_MEASURE,
    CONF_N,
    CONF_N_MAX,
    CONF_NORM,
    CONF_SAMPLES,
    CONF_START,
    CONF_STEPS,
    CONF_TAIL_EPS,
    CONF_X,
    CONF_X_GRID,
    EXIT_DOMAIN,
    EXIT_NUMERIC,
    EXIT_OK,
    FORCE_DIGIT_M,
    FORMATS,
)
from .errors import DomainError, NumericError, ThetaError, ValidationError
from .expansion import (
    approx_error_bounds,
    convergents,
    expand,
    remainder,
)
from .experiments import beta_integrals, digit_frequency, gk_error_curve, khinchin_mean, levy_beta
from .measures import MeasureKind
from .natural_extension import preservation_sweep
from .numerics import ThetaContext, parse_surd, to_float
from .operator import (
    GridFunction,
    OperatorConfig,
    estimate_decay_rate,
    fixed_point_residuals,
    gk_operator_curve,
    uniform_nodes,
)
from .report import ExperimentReport

_LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _context(cfg: RunConfig) -> ThetaContext:
    return ThetaContext.create(cfg.m, cfg.precision)


def _decimal(value, cfg: RunConfig) -> str:
    digits = max(15, int(cfg.precision * math.log10(2)))
    return mpmath.nstr(to_float(value, cfg.precision), digits)


def _x_grid(count: int, ctx: ThetaContext) -> np.ndarray:
    return uniform_nodes(count, ctx)


def cmd_expand(cfg: RunConfig) -> ExperimentReport:
    ctx = _context(cfg)
    x = parse_surd(cfg.get(CONF_X), ctx.m)
    ctx.check_domain(x)
    n = cfg.get(CONF_N)
    digits = expand(x, n + 1, ctx)
    shown = digits.prefix(n)
    report = ExperimentReport(
        "expand",
        cfg.as_meta(),
        ["k", "digit", "p", "q", "convergent", "decimal", "error_lower", "error_upper"],
    )
    pairs = convergents(digits, ctx) if len(digits) else []
    for k in range(1, len(shown) + 1):
        pair = pairs[k]
        lower = upper = ""
        if k + 1 < len(pairs):
            low, high = approx_error_bounds(pair, pairs[k + 1], ctx)
            lower, upper = _decimal(low, cfg), _decimal(high, cfg)
        elif digits.terminated:
            lower = upper = "0"
        report.add_row(k, shown.digits[k - 1], str(pair.p), str(pair.q), str(pair.value), _decimal(pair.value, cfg),
                       lower, upper)
    report.summary.update(
        {
            "x": str(x),
            "digits": list(shown.digits),
            "terminated": shown.terminated,
            "ends_in_m": shown.ends_in(ctx.m),
            "remainder_1": str(remainder(x, 1, ctx)),
        }
    )
    return report


def cmd_gk(cfg: RunConfig) -> ExperimentReport:
    ctx = _context(cfg)
    mu = MeasureKind.from_flag(cfg.get(CONF_MEASURE), ctx)
    return gk_error_curve(
        mu,
        cfg.get(CONF_N_MAX),
        cfg.get(CONF_SAMPLES),
        _x_grid(cfg.get(CONF_X_GRID), ctx),
        cfg.seed,
        ctx,
        threads=cfg.threads,
        precision=cfg.get(CONF_MC_PRECISION),
        meta=cfg.as_meta(),
    )


def cmd_chain(cfg: RunConfig) -> ExperimentReport:
    ctx = _context(cfg)
    start = parse_surd(cfg.get(CONF_START), ctx.m)
    ctx.check_domain(start, "start")
    force = cfg.get(CONF_FORCE_DIGIT)
    if force == FORCE_DIGIT_M:
        force = ctx.m
    trajectory = simulate_chain(float(start), cfg.get(CONF_STEPS), cfg.seed, ctx, force_digit=force)
    target = float(rscc_fixed_point(ctx))
    report = ExperimentReport("chain", cfg.as_meta(), ["step", "digit", "state", "distance_to_fixed_point"])
    for k, state in enumerate(trajectory.states):
        digit = trajectory.digits[k - 1] if k else ""
        report.add_row(k, digit, float(state), abs(float(state) - target))
    report.summary["fixed_point"] = target
    return report


def _start_density(cfg: RunConfig, op_cfg: OperatorConfig, ctx: ThetaContext) -> GridFunction:
    mu = MeasureKind.from_flag(cfg.get(CONF_MEASURE), ctx)
    nodes = uniform_nodes(op_cfg.grid_size, ctx)
    return GridFunction(nodes, mu.density_on(nodes, ctx))


def cmd_operator(cfg: RunConfig) -> ExperimentReport:
    ctx = _context(cfg)
    op_cfg = OperatorConfig(cfg.get(CONF_GRID), cfg.get(CONF_TAIL_EPS), cfg.get(CONF_NORM))
    h = _start_density(cfg, op_cfg, ctx)
    n_max = cfg.get(CONF_N_MAX)
    xs = _x_grid(cfg.get(CONF_X_GRID), ctx)
    curve = gk_operator_curve(h, n_max, xs, op_cfg, ctx, threads=cfg.threads)
    q_hat, residuals = estimate_decay_rate(h, n_max, op_cfg, ctx)
    report = ExperimentReport("operator", cfg.as_meta(), ["n", "x", "error", "residual"])
    for n in range(n_max + 1):
        residual = residuals[n - 1] if 0 < n <= len(residuals) else ""
        for j, x in enumerate(xs):
            report.add_row(n, float(x), float(curve[n, j]), residual)
    report.summary.update({"q_hat": q_hat, "residuals": residuals})
    if cfg.get(CONF_FIXED_POINT_CHECK):
        one, density = fixed_point_residuals(op_cfg, ctx)
        report.summary.update({"fixed_point_one": one, "fixed_point_density": density})
        sys.stderr.write(f"fixed_point_residual={density:.3e} constant_residual={one:.3e}\n")
    return report


def cmd_levy(cfg: RunConfig) -> ExperimentReport:
    ctx = _context(cfg)
    beta_hat, stderr = levy_beta(
        cfg.get(CONF_SAMPLES),
        cfg.get(CONF_N),
        cfg.seed,
        ctx,
        threads=cfg.threads,
        precision=cfg.get(CONF_MC_PRECISION),
    )
    integrals = beta_integrals(ctx)
    fixed_rate = -math.log(float(rscc_fixed_point(ctx)))
    report = ExperimentReport(
        "levy",
        cfg.as_meta(),
        ["beta_hat", "stderr", "integral", "integral_printed", "integral_corrected", "fixed_point_rate"],
    )
    report.add_row(
        beta_hat, stderr, integrals["integral"], integrals["printed"], integrals["corrected"], fixed_rate
    )
    if integrals["printed"] < 0:
        report.summary["integral_printed_sign"] = "negative"
    return report


def cmd_extension(cfg: RunConfig) -> ExperimentReport:
    ctx = _context(cfg)
    report = ExperimentReport("extension", cfg.as_meta(), ["depth", "rectangles", "max_residual"])
    for depth in range(1, cfg.get(CONF_DEPTH) + 1):
        worst, count = preservation_sweep(ctx, depth, cfg.get(CONF_MAX_EXCESS))
        report.add_row(depth, count, worst)
    return report


def cmd_khinchin(cfg: RunConfig) -> ExperimentReport:
    ctx = _context(cfg)
    report = ExperimentReport("khinchin", cfg.as_meta(), ["n", "mean_digit_average"])
    table = khinchin_mean(
        cfg.get(CONF_SAMPLES), cfg.get(CONF_CHECKPOINTS), cfg.seed, ctx, precision=cfg.get(CONF_MC_PRECISION)
    )
    for n, mean in table:
        report.add_row(n, mean)
    return report


def cmd_digits(cfg: RunConfig) -> ExperimentReport:
    ctx = _context(cfg)
    return digit_frequency(
        cfg.get(CONF_SAMPLES),
        cfg.get(CONF_N),
        cfg.seed,
        ctx,
        threads=cfg.threads,
        meta=cfg.as_meta(),
        precision=cfg.get(CONF_MC_PRECISION),
    )


COMMAND_HANDLERS: dict[str, Callable[[RunConfig], ExperimentReport]] = {
    "expand": cmd_expand,
    "gk": cmd_gk,
    "chain": cmd_chain,
    "operator": cmd_operator,
    "levy": cmd_levy,
    "extension": cmd_extension,
    "khinchin": cmd_khinchin,
    "digits": cmd_digits,
}

# flag -> (config key, commands that accept it, type)
_FLAGS: dict[str, tuple[str, tuple[str, ...], type]] = {
    "--x": (CONF_X, ("expand",), str),
    "--n": (CONF_N, ("expand", "levy", "digits"), int),
    "--n-max": (CONF_N_MAX, ("gk", "operator"), int),
    "--samples": (CONF_SAMPLES, ("gk", "levy", "khinchin", "digits"), int),
    "--grid": (CONF_GRID, ("operator",), int),
    "--x-grid": (CONF_X_GRID, ("gk", "operator"), int),
    "--tail-eps": (CONF_TAIL_EPS, ("operator",), float),
    "--measure": (CONF_MEASURE, ("gk", "operator"), str),
    "--norm": (CONF_NORM, ("operator",), str),
    "--mc-precision": (CONF_MC_PRECISION, ("gk", "levy", "khinchin", "digits"), int),
    "--start": (CONF_START, ("chain",), str),
    "--steps": (CONF_STEPS, ("chain",), int),
    "--force-digit": (CONF_FORCE_DIGIT, ("chain",), str),
    "--depth": (CONF_DEPTH, ("extension",), int),
    "--max-excess": (CONF_MAX_EXCESS, ("extension",), int),
    "--checkpoints": (CONF_CHECKPOINTS, ("khinchin",), str),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=int, required=True, help="field parameter m (θ = 1/√m)")
    common.add_argument("--seed", type=int, help="master 64-bit seed")
    common.add_argument("--threads", type=int, help="worker threads for data-parallel work")
    common.add_argument("--precision", type=int, help="bits for exact-to-float conversion")
    common.add_argument("--out", help="output path ('-' for stdout)")
    common.add_argument("--format", choices=FORMATS, help="output format")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging on stderr")

    parser = argparse.ArgumentParser(prog="thetacf", description="θ-expansions: digits, Gauss-Kuzmin, operator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")
    for command in COMMANDS:
        cmd = sub.add_parser(command, parents=[common])
        for flag, (key, commands, kind) in _FLAGS.items():
            if command in commands:
                cmd.add_argument(flag, dest=key, type=kind)
        if command == "operator":
            cmd.add_argument("--fixed-point-check", dest=CONF_FIXED_POINT_CHECK, action="store_true", default=None)
    return parser


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format=LOG_FORMAT, stream=sys.stderr)


def run(cfg: RunConfig) -> ExperimentReport:
    _LOGGER.debug("run: %s", cfg)
    return COMMAND_HANDLERS[cfg.command](cfg)


def main(argv: Optional[list[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    _setup_logging(args.pop("verbose", False))
    command = args.pop("command")
    try:
        cfg = RunConfig.build(command, args)
        report = run(cfg)
        report.write(cfg.out, cfg.format)
    except (DomainError, ValidationError) as exc:
        _LOGGER.debug("%s failed", command, exc_info=True)
        sys.stderr.write(f"thetacf {command}: {exc}\n")
        return EXIT_DOMAIN
    except (NumericError, ThetaError, ArithmeticError) as exc:
        _LOGGER.debug("%s failed", command, exc_info=True)
        sys.stderr.write(f"thetacf {command}: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
