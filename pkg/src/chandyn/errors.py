"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/usage -> 1,
data/format -> 2, numerical failures -> 3.
"""


class ChandynError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ChandynError, ValueError):
    """Invalid configuration value or key."""


class DataError(ChandynError, ValueError):
    """Malformed numeric data (NaN/Inf pixels, missing components)."""


class FormatError(ChandynError, ValueError):
    """Malformed serialized file; message names the offending field."""


class TraceParseError(FormatError):
    """Malformed trace CSV; message carries the offending row number."""


class ShapeError(ChandynError, ValueError):
    """Array shape mismatch; message names both shapes."""


class UnboundedCoherenceError(ChandynError, ValueError):
    """Coherence time requested for a static (zero-speed) receiver."""


class DegenerateModelError(ChandynError, ValueError):
    """Yule-Walker system is singular or has reflection magnitude >= 1."""


class DegenerateChannelError(ChandynError, ValueError):
    """Zero channel vector cannot be precoded."""


class TrainingError(ChandynError, RuntimeError):
    """Training diverged or could not run; carries the epoch index."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class LineageError(ChandynError, ValueError):
    """Evaluation data overlaps the split a checkpoint was trained on."""
