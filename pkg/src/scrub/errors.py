"""Exception hierarchy shared by every module."""


class ScrubError(Exception):
    """Base class for all package errors."""


class FormatError(ScrubError, ValueError):
    """A file does not follow the expected container layout."""


class IntegrityError(ScrubError, ValueError):
    """Data is structurally readable but inconsistent (lengths, NaN/Inf, label ranges)."""


class ConfigError(ScrubError, ValueError):
    """A configuration object violates its invariants."""


class DegenerateLabelError(ScrubError, ValueError):
    """Labels contain a single class where at least two are required."""


class DimensionMismatchError(ScrubError, ValueError):
    """Two operands disagree on embedding dimension."""
