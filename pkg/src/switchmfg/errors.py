"""Error types shared across the solver suite."""


class SolverError(RuntimeError):
    """An iterative or time-stepping solver failed to produce a usable result."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class GibbsOverflowError(SolverError):
    """A Gibbs-rate exponent exceeded the overflow guard.

    Raised instead of clamping: a clamped exponential would silently distort
    the switching rates.  Increase eta or rescale the switching costs.
    """


class ConfigError(ValueError):
    """A run configuration violates the documented schema."""
