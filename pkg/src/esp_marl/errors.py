"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument violates an operation's precondition."""


class LayoutMismatch(ValueError):
    """A vector does not match the length declared by its layout."""


class UnsupportedCheck(RuntimeError):
    """A checker was asked to run on an environment it cannot handle."""


class EpisodeFinished(RuntimeError):
    """``step`` was called on a state whose episode already ended."""


class NonFiniteError(FloatingPointError):
    """A loss or gradient contained NaN or inf; the update was aborted."""


class ConvergenceError(RuntimeError):
    """Value iteration hit its iteration cap before reaching the tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    """Configuration could not be parsed; ``key`` names the offending path."""

    def __init__(self, message, key=None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
