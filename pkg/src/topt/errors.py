"""Exception types shared across the solver stack."""


class ToptError(Exception):
    """Base class for all solver errors."""


class ConfigError(ToptError):
    """Invalid problem or experiment configuration."""


class SolverFailure(ToptError):
    """A linear solve broke down (singular matrix, nonfinite state)."""


class DegenerateTarget(ToptError):
    """Terminal state coincides with the target; the normalized adjoint
    terminal value (and hence the derivative of the distance) is undefined."""


class AccelerationFailure(ToptError):
    """Semi-smooth Newton on the coefficient simplex did not converge."""


class NonQualifiedStationarity(ToptError):
    """The value-function derivative vanished at the current iterate, so the
    outer Newton step is undefined (non-qualified optimality conditions)."""


class NoConvergence(ToptError):
    """Iteration budget exhausted before reaching the requested tolerance."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NoSignChange(ToptError):
    """Root bracketing failed: the sampled function does not change sign."""
