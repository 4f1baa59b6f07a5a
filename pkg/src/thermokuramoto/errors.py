"""Exception types raised across the package."""

from __future__ import annotations

from typing import Any, Optional


class DomainError(ValueError):
    """Input lies outside the domain of an operation (e.g. a nonpositive temperature)."""

    def __init__(self, message: str, index: Optional[int] = None) -> None:
        super().__init__(message)
        self.index = index


class IntegrationError(RuntimeError):
    """Time stepping could not continue; carries the last accepted state."""

    def __init__(self, message: str, time: float, last_state: Any = None) -> None:
        super().__init__(f"{message} (t={time:.6g})")
        self.time = time
        self.last_state = last_state


class InfeasibleError(ValueError):
    """A scenario or solve request violates the framework it claims to live in."""

    def __init__(self, condition: str) -> None:
        super().__init__(condition)
        self.condition = condition


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, iterate: Any = None, residual: float = float("nan")) -> None:
        super().__init__(f"{message} (residual={residual:.3e})")
        self.iterate = iterate
        self.residual = residual


class FitError(ValueError):
    def __init__(self, message: str, floor_reached: bool = True) -> None:
        super().__init__(message)
        self.floor_reached = floor_reached


class ConfigError(ValueError):
    """Unknown claim id, bad override key, or similar configuration mistake."""


class ScenarioParseError(ValueError):
    """Scenario text could not be parsed or failed schema validation."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None) -> None:
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} [{', '.join(where)}]" if where else message)
        self.field = field
        self.line = line
