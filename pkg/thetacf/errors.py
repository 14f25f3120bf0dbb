from __future__ import annotations


class ThetaError(Exception):
    """Base class for every error raised by thetacf."""


class DomainError(ThetaError, ValueError):
    """An argument lies outside the domain of the operation (e.g. x outside [0, θ])."""


class ValidationError(ThetaError, ValueError):
    """A configuration, density or textual input failed validation."""


class NumericError(ThetaError, ArithmeticError):
    """Internal numeric failure that should not happen for valid inputs."""
