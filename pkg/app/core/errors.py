"""
Standardized error types.

Every failure raised by the numerical core carries a human-readable message
and an optional ``data`` payload (achieved estimates, offending points,
seeds), so that the CLI can log a consistent record:
{
    "error": str,
    "message": str,
    "data": Any | None
}
"""

from typing import Any


class ComputationError(Exception):
    """
    Base error that carries a message plus structured context.

    Usage:
        raise QuadratureError(
            message="Tolerance not reached",
            data={"estimate": 1.7, "abserr": 1e-3},
        )
    """

    def __init__(self, message: str, data: Any = None):
        """
        Initialize the error.

        Args:
            message: Human-readable error message
            data: Optional additional context
        """
        self.message = message
        self.data = data
        super().__init__(message)

    def to_dict(self) -> dict[str, Any]:
        """Serialize for logs and reports."""
        return {"error": type(self).__name__, "message": self.message, "data": self.data}


class DomainError(ComputationError):
    """Argument outside the admissible domain (window, step guard, ranges)."""


class InvalidConfigurationError(ComputationError):
    """A configuration violates simplicity or mark positivity."""


class QuadratureError(ComputationError):
    """Adaptive quadrature did not reach the requested tolerance."""

    @property
    def estimate(self) -> float | None:
        return (self.data or {}).get("estimate")


class FlowIntegrationError(ComputationError):
    """The flow integrator produced a non-finite state or an unusable step."""


class EnvelopeError(ComputationError):
    """The rejection envelope was exceeded by the density."""


class DerivativeDepthError(ComputationError):
    """An expression needs derivative data one order deeper than available."""

    def __init__(self, what: str, order: int):
        super().__init__(
            message=f"{what} requires derivative data of order {order}",
            data={"object": what, "missing_order": order},
        )
        self.order = order


class NonFiniteSampleError(ComputationError):
    """A Monte Carlo functional returned NaN or infinity."""


class RunConfigError(ComputationError):
    """Run-config parsing or validation failed; ``data`` lists (line, message)."""

    def __init__(self, problems: list[tuple[int | None, str]]):
        self.problems = problems
        lines = [f"line {line}: {msg}" if line else msg for line, msg in problems]
        super().__init__(message="; ".join(lines), data=problems)
