"""Exception and warning types shared across the package."""


class RingPairError(Exception):
    """Base class for all package errors."""


class ValidationError(RingPairError, ValueError):
    """Invalid parameter, configuration value or argument."""


class ConfigError(ValidationError):
    """Malformed configuration document.

    ``line`` is the 1-based line number of the offending entry, or ``None``
    when the problem is not tied to a single line (e.g. a missing key).
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PoleError(RingPairError, ArithmeticError):
    """A transfer function was evaluated on (or numerically at) a pole."""


class NumericalError(RingPairError, ArithmeticError):
    """A numerical procedure failed, e.g. an ill-conditioned linear solve."""


class WeakPumpWarning(UserWarning):
    """The weak-pump (first order in |r|) treatment is outside its validity range."""


class HighQRegimeWarning(UserWarning):
    """A high-Q limit form was requested outside the high-Q regime."""


class ConfigWarning(UserWarning):
    """Non-fatal configuration issue, e.g. a duplicated key (the last value wins)."""
