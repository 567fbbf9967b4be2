"""
Hadaptive - Custom Exceptions
Centralized exception definitions shared by every package.
"""


class HadaptiveError(Exception):
    """Base exception for Hadaptive errors."""
    pass


class InvalidArgumentError(HadaptiveError, ValueError):
    """Argument outside the operation's domain (shape, range, parity)."""
    pass


class InvalidStateError(HadaptiveError, RuntimeError):
    """Operation called on an object in the wrong state."""
    pass


class ConfigurationError(HadaptiveError, ValueError):
    """Invalid layer, run or project configuration."""
    pass


class SpecParseError(ConfigurationError):
    """Architecture spec file could not be parsed."""

    def __init__(self, message: str, line_number: int = 0):
        self.line_number = line_number
        if line_number:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class NumericalError(HadaptiveError, FloatingPointError):
    """Non-finite value produced by a forward op (debug mode)."""
    pass


class DivergenceError(HadaptiveError):
    """Training loss became NaN or infinite."""
    pass


class SchedulerError(HadaptiveError):
    """Dispatch strategies disagree on the same input."""
    pass
