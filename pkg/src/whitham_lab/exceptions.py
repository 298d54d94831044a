"""Exception types raised by the solvers and the harness."""


class BlowUpError(RuntimeError):
    """A time integration produced non-finite values or lost smoothness."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConsistencyError(RuntimeError):
    """Two independent computations of the same quantity disagree."""


class AliasingError(RuntimeError):
    """A field meant to be slowly varying carries energy outside the slow band."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""
