"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration, CLI arguments, or input files."""


class ConditionError(ValueError):
    """A kernel fails a structural condition required by the caller."""


class DivergenceError(RuntimeError):
    """A gradient flow produced non-finite values."""

    def __init__(self, message, state=None, trace=None):
        super().__init__(message)
        self.state = state
        self.trace = trace


class InvariantViolation(RuntimeError):
    """An output violated a bound that the theory guarantees."""
