"""Exception types raised across the package."""


class SurrogateError(Exception):
    """Base class for all package errors."""


class ContractViolation(SurrogateError, ValueError):
    """An operation was called with arguments outside its preconditions."""


class ParseError(SurrogateError, ValueError):
    """Malformed input file or config text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDatasetError(SurrogateError, ValueError):
    pass


class DomainError(SurrogateError, ValueError):
    """A basis function was evaluated outside its domain."""


class ConvergenceError(SurrogateError, RuntimeError):
    pass


class InfeasibleError(SurrogateError, RuntimeError):
    """No coefficient vector satisfies the accumulated response constraints."""


class DegenerateRatesError(SurrogateError, ValueError):
    """Series closed form requested with equal rate constants."""
