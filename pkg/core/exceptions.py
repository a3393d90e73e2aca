"""
Exception types shared by the QuatTrack packages.

The CLI maps each type onto a stable exit code.
"""

from typing import Optional


class QuatTrackError(Exception):
    """Base class for all QuatTrack errors."""


class ConfigError(QuatTrackError, ValueError):
    """Invalid scenario, gain or region parameters."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        self.detail = message
        if field and field not in message:
            message = f"{field}: {message}"
        super().__init__(message)


class NumericalAbortError(QuatTrackError, ArithmeticError):
    """A non-finite value appeared in the integrated state."""

    def __init__(self, t: float, step: int, component: str):
        self.t = t
        self.step = step
        self.component = component
        super().__init__(
            f"non-finite value in state component '{component}' at step {step} (t={t:.6g} s)"
        )


class InfeasibleGainsError(QuatTrackError):
    """No region constant and gains can certify the given initial error."""
