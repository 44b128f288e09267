"""Exception hierarchy shared by every drift_lab module."""


class DriftLabError(Exception):
    """Base class for all errors raised by drift_lab."""


class InvalidParams(DriftLabError, ValueError):
    """Model parameters violate a precondition."""


class NumericalError(DriftLabError, ArithmeticError):
    """Base class for failures that arise during a computation."""


class DegenerateAmplitude(NumericalError):
    """Coherence amplitude too small for the phase to be defined."""


class NonFiniteState(NumericalError):
    """An integration stage produced NaN or inf."""


class AmbiguousUnwrap(NumericalError):
    """Consecutive phase samples are too far apart to unwrap reliably."""


class GridTooCoarse(NumericalError):
    """A scan maximum sits on the boundary of its grid."""


class InsufficientData(NumericalError):
    """Not enough samples for the requested statistic."""


class ConfigError(DriftLabError, ValueError):
    """Base class for run-configuration problems."""


class ParseError(ConfigError):
    """Configuration text is not well-formed JSON."""


class ValidationError(ConfigError):
    """A configuration value is out of range or of the wrong type."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class UnknownKey(ValidationError):
    """Configuration contains a key that is not recognised."""

    def __init__(self, key):
        super().__init__(key, "unknown configuration key")
