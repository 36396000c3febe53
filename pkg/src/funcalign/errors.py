"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid dimensions, hyperparameters or run settings."""


class DomainError(ValueError):
    """Evaluation point outside the normalized time domain [0, 1]."""


class DegenerateInputError(ValueError):
    """Input that carries no information (zero total, empty curve, t0 == tf)."""


class InvariantViolationError(RuntimeError):
    """A state that the model guarantees can never occur was encountered."""


class NumericalError(RuntimeError):
    """Linear algebra failure that survived the jitter ladder."""


class UsageError(ValueError):
    """API misuse, e.g. summarizing an empty chain."""


class ParseError(ValueError):
    """Malformed input file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
