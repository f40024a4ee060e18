"""Exception types shared across the package."""


class FreqSplitError(Exception):
    """Base class for all package errors."""


class DomainError(FreqSplitError, ValueError):
    """An argument lies outside the domain where the model is defined."""


class ConfigError(FreqSplitError):
    """A configuration file or override could not be parsed or validated."""


class FitError(FreqSplitError):
    """A fit could not be set up or did not converge."""


class SchemaError(FreqSplitError):
    """A tabular data file does not match the expected schema."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
