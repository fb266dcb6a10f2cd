"""Exception hierarchy shared by the simulator modules and the CLI.

Every error raised on purpose derives from ``SimulationError`` and also from
the closest builtin, so callers that only know about ``ValueError`` or
``RuntimeError`` keep working.
"""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for all simulator errors."""


class InvalidInputError(SimulationError, ValueError):
    """Non-finite values, dimension mismatches or out-of-domain arguments."""


class OrderingError(SimulationError, ValueError):
    """A sample was pushed with a timestamp that is not strictly increasing."""


class NotWarmError(SimulationError, RuntimeError):
    """The sample buffer does not yet span what the quadrature needs."""


class PhaseError(SimulationError, RuntimeError):
    """An operation was called in the wrong GPS phase."""


class InfeasibleStartError(SimulationError, ValueError):
    """A GPS-denied interval would start with V above the ceiling V_u."""


class NumericalBlowupError(SimulationError, ArithmeticError):
    """An integrator stage produced a non-finite value.

    Attributes:
        t: Simulation time of the step that failed.
    """

    def __init__(self, message: str, t: float) -> None:
        super().__init__(f"{message} (t={t:.6f})")
        self.t = t


class ConfigError(SimulationError, ValueError):
    """A scenario file does not match the schema.

    Attributes:
        field: Dotted path of the offending field, e.g. ``"gains.k1"``.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class ConfigValidationError(ConfigError):
    """A scenario parses but violates a stability-analysis inequality."""
