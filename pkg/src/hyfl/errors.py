"""Exception types shared across the package."""


class HyflError(Exception):
    """Base class for all package errors."""


class ConfigError(HyflError):
    """Invalid configuration value, bounds violation, or missing input file."""


class ParseError(HyflError):
    """Malformed dataset text. Carries the 1-based line number when known."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class LabelError(ParseError):
    """A label could not be mapped to -1/+1."""
