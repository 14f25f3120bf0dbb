from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Optional

import voluptuous as vol

from . import __version__
from .const import (
    COMMANDS,
    CONF_CHECKPOINTS,
    CONF_COMMAND,
    CONF_DEPTH,
    CONF_FIXED_POINT_CHECK,
    CONF_FORCE_DIGIT,
    CONF_FORMAT,
    CONF_GRID,
    CONF_M,
    CONF_MC_PRECISION,
    CONF_MAX_EXCESS,
    CONF_MEASURE,
    CONF_N,
    CONF_N_MAX,
    CONF_NORM,
    CONF_OUT,
    CONF_PRECISION,
    CONF_SAMPLES,
    CONF_SEED,
    CONF_START,
    CONF_STEPS,
    CONF_TAIL_EPS,
    CONF_THREADS,
    CONF_X,
    CONF_X_GRID,
    DEFAULT_CHAIN_STEPS,
    DEFAULT_DECAY_N_MAX,
    DEFAULT_DIGIT_N,
    DEFAULT_EXPAND_MAX,
    DEFAULT_EXPAND_N,
    DEFAULT_GK_N_MAX,
    DEFAULT_GRID_SIZE,
    DEFAULT_KHINCHIN_CHECKPOINTS,
    DEFAULT_KHINCHIN_SAMPLES,
    DEFAULT_LEVY_N,
    DEFAULT_LEVY_SAMPLES,
    DEFAULT_PRECISION,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DEFAULT_SWEEP_DEPTH,
    DEFAULT_SWEEP_MAX_EXCESS,
    DEFAULT_TAIL_EPS,
    DEFAULT_THREADS,
    DEFAULT_X_GRID,
    DEFAULT_MC_PRECISION,
    DOUBLE_DOUBLE_PRECISION,
    FLOAT64_PRECISION,
    FORCE_DIGIT_M,
    FORMAT_CSV,
    FORMATS,
    MAX_GRID_SIZE,
    MAX_M,
    MAX_PRECISION,
    MAX_SEED,
    MAX_SWEEP_DEPTH,
    MAX_THREADS,
    MEASURE_LEBESGUE,
    MIN_DECAY_ITERATIONS,
    MIN_DIGIT_SAMPLES,
    MIN_GK_SAMPLES,
    MIN_GRID_SIZE,
    MIN_LEVY_N,
    MIN_LEVY_SAMPLES,
    MIN_M,
    MIN_PRECISION,
    MIN_TAIL_EPS,
    NORM_SUP,
    NORMS,
)
from .errors import ValidationError

_LOGGER = logging.getLogger(__name__)

META_VERSION = "version"


def _int_range(low: int, high: Optional[int] = None):
    return vol.All(vol.Coerce(int), vol.Range(min=low, max=high))


def _checkpoints(value: Any) -> list[int]:
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    try:
        points = [int(v) for v in value]
    except (TypeError, ValueError) as exc:
        raise vol.Invalid(f"checkpoints must be integers, got {value!r}") from exc
    if not points or points[0] < 1 or any(b <= a for a, b in zip(points, points[1:])):
        raise vol.Invalid("checkpoints must be positive and strictly increasing")
    return points


def _force_digit(value: Any):
    if value in (None, "", "none", "None"):
        return None
    if value == FORCE_DIGIT_M:
        return FORCE_DIGIT_M
    return vol.All(vol.Coerce(int), vol.Range(min=MIN_M))(value)


def _common_fields(defaults: dict) -> dict:
    fields: dict = {}
    fields[vol.Required(CONF_M, default=defaults.get(CONF_M, MIN_M))] = _int_range(MIN_M, MAX_M)
    fields[vol.Required(CONF_SEED, default=defaults.get(CONF_SEED, DEFAULT_SEED))] = _int_range(0, MAX_SEED)
    fields[vol.Required(CONF_THREADS, default=defaults.get(CONF_THREADS, DEFAULT_THREADS))] = _int_range(
        1, MAX_THREADS
    )
    fields[vol.Required(CONF_PRECISION, default=defaults.get(CONF_PRECISION, DEFAULT_PRECISION))] = _int_range(
        MIN_PRECISION, MAX_PRECISION
    )
    fields[vol.Required(CONF_FORMAT, default=defaults.get(CONF_FORMAT, FORMAT_CSV))] = vol.In(FORMATS)
    fields[vol.Required(CONF_OUT, default=defaults.get(CONF_OUT, "-"))] = str
    return fields


def _command_fields(command: str, defaults: dict) -> dict:
    fields: dict = {}

    def req(key: str, default: Any, validator: Any) -> None:
        fields[vol.Required(key, default=defaults.get(key, default))] = validator

    if command == "expand":
        fields[vol.Required(CONF_X)] = vol.All(str, vol.Length(min=1))
        req(CONF_N, DEFAULT_EXPAND_N, _int_range(0, DEFAULT_EXPAND_MAX))
    elif command == "gk":
        req(CONF_N_MAX, DEFAULT_GK_N_MAX, _int_range(0, 200))
        req(CONF_SAMPLES, DEFAULT_SAMPLES, _int_range(MIN_GK_SAMPLES))
        req(CONF_X_GRID, DEFAULT_X_GRID, _int_range(2, 10_001))
        req(CONF_MEASURE, MEASURE_LEBESGUE, str)
        req(CONF_MC_PRECISION, DEFAULT_MC_PRECISION, _int_range(FLOAT64_PRECISION, MAX_PRECISION))
    elif command == "chain":
        req(CONF_START, "0", str)
        req(CONF_STEPS, DEFAULT_CHAIN_STEPS, _int_range(0, DEFAULT_EXPAND_MAX))
        req(CONF_FORCE_DIGIT, None, _force_digit)
    elif command == "operator":
        req(CONF_GRID, DEFAULT_GRID_SIZE, _int_range(MIN_GRID_SIZE, MAX_GRID_SIZE))
        req(CONF_TAIL_EPS, DEFAULT_TAIL_EPS, vol.All(vol.Coerce(float), vol.Range(min=MIN_TAIL_EPS, max=1.0)))
        req(CONF_N_MAX, DEFAULT_DECAY_N_MAX, _int_range(MIN_DECAY_ITERATIONS, 500))
        req(CONF_NORM, NORM_SUP, vol.In(NORMS))
        req(CONF_MEASURE, MEASURE_LEBESGUE, str)
        req(CONF_X_GRID, DEFAULT_X_GRID, _int_range(2, 10_001))
        req(CONF_FIXED_POINT_CHECK, False, vol.Boolean())
    elif command == "levy":
        req(CONF_SAMPLES, DEFAULT_LEVY_SAMPLES, _int_range(MIN_LEVY_SAMPLES))
        req(CONF_N, DEFAULT_LEVY_N, _int_range(MIN_LEVY_N))
        req(CONF_MC_PRECISION, DEFAULT_MC_PRECISION, _int_range(FLOAT64_PRECISION, DOUBLE_DOUBLE_PRECISION))
    elif command == "extension":
        req(CONF_DEPTH, DEFAULT_SWEEP_DEPTH, _int_range(1, MAX_SWEEP_DEPTH))
        req(CONF_MAX_EXCESS, DEFAULT_SWEEP_MAX_EXCESS, _int_range(0, 50))
    elif command == "khinchin":
        req(CONF_SAMPLES, DEFAULT_KHINCHIN_SAMPLES, _int_range(1))
        req(CONF_CHECKPOINTS, list(DEFAULT_KHINCHIN_CHECKPOINTS), _checkpoints)
        req(CONF_MC_PRECISION, DEFAULT_MC_PRECISION, _int_range(FLOAT64_PRECISION, DOUBLE_DOUBLE_PRECISION))
    elif command == "digits":
        req(CONF_SAMPLES, DEFAULT_SAMPLES, _int_range(MIN_DIGIT_SAMPLES))
        req(CONF_N, DEFAULT_DIGIT_N, _int_range(1, DEFAULT_EXPAND_MAX))
        req(CONF_MC_PRECISION, DEFAULT_MC_PRECISION, _int_range(FLOAT64_PRECISION, DOUBLE_DOUBLE_PRECISION))
    else:
        raise ValidationError(f"unknown command {command!r}; expected one of {COMMANDS}")
    return fields


def build_schema(command: str, defaults: Optional[dict] = None) -> vol.Schema:
    if not isinstance(defaults, dict):
        defaults = {}
    fields = _common_fields(defaults)
    fields.update(_command_fields(command, defaults))
    return vol.Schema(fields)


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    """A validated command invocation; every report embeds it as metadata."""

    command: str
    m: int
    seed: int = DEFAULT_SEED
    threads: int = DEFAULT_THREADS
    precision: int = DEFAULT_PRECISION
    format: str = FORMAT_CSV
    out: str = "-"
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def build(cls, command: str, values: dict[str, Any]) -> RunConfig:
        """Validate raw values (CLI arguments or metadata strings) for a command."""
        schema = build_schema(command)
        known = {str(key) for key in schema.schema}
        raw = {k: v for k, v in values.items() if k in known and (v is not None or k == CONF_FORCE_DIGIT)}
        try:
            data = schema(raw)
        except vol.Invalid as exc:
            raise ValidationError(f"{command}: {exc}") from exc
        return cls(
            command=command,
            m=data.pop(CONF_M),
            seed=data.pop(CONF_SEED),
            threads=data.pop(CONF_THREADS),
            precision=data.pop(CONF_PRECISION),
            format=data.pop(CONF_FORMAT),
            out=data.pop(CONF_OUT),
            params=data,
        )

    def get(self, key: str) -> Any:
        return self.params[key]

    def as_meta(self) -> dict[str, str]:
        meta = {
            CONF_COMMAND: self.command,
            META_VERSION: __version__,
            CONF_M: str(self.m),
            CONF_SEED: str(self.seed),
            CONF_THREADS: str(self.threads),
            CONF_PRECISION: str(self.precision),
            CONF_FORMAT: self.format,
            CONF_OUT: self.out,
        }
        for key in sorted(self.params):
            meta[key] = _render(self.params[key])
        return meta

    @classmethod
    def from_meta(cls, meta: dict[str, str]) -> RunConfig:
        values = dict(meta)
        command = values.pop(CONF_COMMAND, None)
        values.pop(META_VERSION, None)
        if command not in COMMANDS:
            raise ValidationError(f"metadata names no known command: {command!r}")
        return cls.build(command, values)
