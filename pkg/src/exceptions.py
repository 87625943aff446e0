"""
Exceptions raised when a numerical run cannot continue.

Contract violations (bad lengths, odd grids, invalid parameters) are reported
with ValueError; the classes below cover failures of the numerics themselves.
"""
from typing import Any, Dict, Optional


class NumericalError(RuntimeError):
    """Base class for failures of a numerical computation."""


class EnergyShiftError(NumericalError):
    """Raised when E_1 + E_c is not positive, so r = sqrt(E_1 + E_c) is undefined."""


class StepFailure(NumericalError):
    """
    Raised when a time step cannot be completed.

    Args:
        message: Human readable reason
        step_index: Index of the failing step, when known
        diagnostics: Values that led to the failure
    """

    def __init__(self, message: str, step_index: Optional[int] = None,
                 diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.step_index = step_index
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        text = super().__str__()
        if self.step_index is not None:
            text = f"step {self.step_index}: {text}"
        if self.diagnostics:
            details = ", ".join(f"{key}={value!r}" for key, value in self.diagnostics.items())
            text = f"{text} ({details})"
        return text
