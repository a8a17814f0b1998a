"""Exception types shared across the package."""


class FlapnetError(Exception):
    """Base class for all package errors."""


class ValidationError(FlapnetError, ValueError):
    """Input data violates a documented invariant."""


class ParseError(ValidationError):
    """A file could not be decoded; message names the offending line."""
