"""Exception types shared across the package."""


class DivudaError(Exception):
    """Base class for all package errors."""


class DimensionError(DivudaError):
    """Incompatible matrix shapes."""


class ParameterError(DivudaError):
    """Hyperparameter or argument outside its valid range."""


class ConfigError(DivudaError):
    """Invalid scenario or experiment configuration."""


class DataError(DivudaError):
    """Dataset content violates its contract (bad labels, empty set, ...)."""


class ParseError(DataError):
    """Malformed input file; carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
