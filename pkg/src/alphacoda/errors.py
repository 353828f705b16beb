"""Exception hierarchy shared across the package."""


class AlphaCodaError(Exception):
    """Base class for every error raised by alphacoda."""


class InvalidDimensionError(AlphaCodaError, ValueError):
    pass


class InvalidParameterError(AlphaCodaError, ValueError):
    pass


class ZeroInLogError(AlphaCodaError, ValueError):
    """A log-ratio transform met a zero or negative part."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DegenerateInverseError(AlphaCodaError, ArithmeticError):
    """Every component was clamped to zero during an inverse transform."""


class DomainError(AlphaCodaError, ValueError):
    pass


class ParseError(AlphaCodaError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataGapError(AlphaCodaError, ValueError):
    pass


class FormatError(AlphaCodaError, ValueError):
    pass


class FitError(AlphaCodaError, RuntimeError):
    """Model estimation failed; ``diagnostics`` carries the best-so-far state."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class TuningError(AlphaCodaError, RuntimeError):
    pass


class ConfigError(AlphaCodaError, ValueError):
    pass


class ConfigContradiction(ConfigError):
    """The configuration is well-formed but asks for incompatible things."""
