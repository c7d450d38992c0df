"""Exception types raised by the solver library and mapped to CLI exit codes."""

from __future__ import annotations

from typing import Any, List, Optional, Sequence


class AlmRatesError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(AlmRatesError, ValueError):
    pass


class OperatorSpecError(AlmRatesError, ValueError):
    pass


class SourceConditionError(AlmRatesError, ValueError):
    pass


class RateFitError(AlmRatesError, ValueError):
    pass


class InnerSolverError(AlmRatesError, RuntimeError):
    """The inner Tikhonov solver stopped before reaching its tolerance."""

    def __init__(self, message: str, *, achieved: float, iterations: int):
        super().__init__(f"{message} (achieved={achieved:.3e}, iterations={iterations})")
        self.achieved = achieved
        self.iterations = iterations


class SafetyCapReached(AlmRatesError, RuntimeError):
    """The outer iteration was aborted; `records` holds what was computed so far."""

    def __init__(self, reason: str, records: Optional[Sequence[Any]] = None):
        super().__init__(reason)
        self.reason = reason
        self.records = list(records or [])


class ConfigError(AlmRatesError, ValueError):
    """Experiment configuration could not be parsed or validated."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
