"""Exact and Monte-Carlo tools for θ-expansions with θ² = 1/m."""
from __future__ import annotations

__version__ = "1.0.0"
