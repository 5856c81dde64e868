"""Exception hierarchy shared across the package."""


class PolarLabError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgument(PolarLabError, ValueError):
    """A caller supplied inconsistent or out-of-range arguments."""


class SchemaError(PolarLabError):
    """A file failed to parse or violates its declared format invariants."""


class NumericError(PolarLabError):
    """A computation produced non-finite or otherwise unusable numbers."""


class InvalidState(PolarLabError):
    """An operation finished in a state that violates its own contract."""
