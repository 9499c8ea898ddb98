"""Exception types shared across the package."""


class FracksError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FracksError, ValueError):
    """A parameter is outside its legal range or inconsistent with others."""

    def __init__(self, message, key=None):
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key


class InputError(FracksError, ValueError):
    """Input data (a field, a series, a file) violates a precondition."""


class VerificationError(FracksError, AssertionError):
    """A checked inequality failed beyond its tolerance."""


class OutputError(FracksError, OSError):
    """An output location cannot be created or written."""
