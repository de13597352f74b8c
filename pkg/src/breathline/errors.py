"""Exception types shared across the package."""


class BreathlineError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(BreathlineError):
    """A file does not conform to its declared container format."""


class UnsupportedFormatError(FormatError):
    """A file parses but uses an encoding we do not handle."""


class ValidationError(BreathlineError):
    """Structured input (manifest, annotations) fails validation."""


class ConfigError(BreathlineError):
    """A configuration value is out of range or mutually inconsistent."""


class InputError(BreathlineError):
    """Runtime input violates an operation's precondition."""


class ShapeError(InputError):
    """Array input has the wrong shape."""


class TrainingError(BreathlineError):
    """A model cannot be trained on the given data."""


class UndefinedMetricError(BreathlineError):
    """A metric is undefined on the given sample (e.g. one-class AUPRC)."""
