"""Exception types shared across the solver and certification stack."""


class SimulationError(Exception):
    """Base class for all simulator-specific failures."""


class CflViolation(SimulationError):
    """Advective or chemotactic face speed exceeds the configured CFL bound."""


class NegativeDensity(SimulationError):
    """A transport step produced negative cell values beyond roundoff size."""


class LinearSolveFailure(SimulationError):
    """Iterative linear solver exhausted its iteration budget."""


class DomainError(ValueError, SimulationError):
    """Argument outside the admissible parameter range of a formula."""


class SupportMismatch(SimulationError):
    """Test-function temporal support is not covered by the trajectory."""


class InvariantViolation(SimulationError):
    """A monitored runtime invariant failed during time marching."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class ConfigError(SimulationError):
    """Malformed or inconsistent configuration input."""
