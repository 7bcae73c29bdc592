"""Exception types shared across the package."""

from .kernels import ConvergenceError
from .linalg import NumericFailure

__all__ = [
    "ConvergenceError",
    "NumericFailure",
    "PayloadError",
    "NoCanonicalMetric",
    "EmptyBallError",
    "MetricValidationError",
    "FiltrationError",
    "ConstructionError",
    "TruncationError",
    "DegenerateSampling",
    "NoRootError",
    "ContractionFailure",
    "InsufficientDepth",
    "DegenerateDenominator",
    "ConfigError",
]


class PayloadError(TypeError):
    """Element payload does not belong to the group context."""


class NoCanonicalMetric(LookupError):
    pass


class EmptyBallError(LookupError):
    """No non-identity element found within the requested radius."""


class MetricValidationError(ValueError):
    pass


class FiltrationError(ValueError):
    """A filtration level breaks symmetry, nesting, or its growth law."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class ConstructionError(RuntimeError):
    """A construction produced an output violating its own guarantee."""


class TruncationError(LookupError):
    """A search left its working truncation."""


class DegenerateSampling(RuntimeError):
    """Sampling produced no usable elements (distinct from a refutation)."""


class NoRootError(ValueError):
    pass


class ContractionFailure(RuntimeError):
    def __init__(self, message, step=None, ratio=None):
        super().__init__(message)
        self.step = step
        self.ratio = ratio


class InsufficientDepth(ValueError):
    pass


class DegenerateDenominator(ZeroDivisionError):
    pass


class ConfigError(ValueError):
    def __init__(self, message, field=None, line=None):
        where = ""
        if field is not None:
            where += f" [field {field}]"
        if line is not None:
            where += f" [line {line}]"
        super().__init__(message + where)
        self.field = field
        self.line = line
