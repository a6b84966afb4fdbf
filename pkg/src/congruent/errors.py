"""Exception types raised across the package."""


class CongruentError(Exception):
    """Base class for all package errors."""


class DomainError(CongruentError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class OutOfRangeError(CongruentError, ValueError):
    """An argument exceeds the range covered by a precomputed table."""


class CapacityError(CongruentError):
    """A request would exceed a configured memory or enumeration budget."""


class ConfigurationError(CongruentError, ValueError):
    """A tuning parameter (depth, tolerance, cutoff) is unusable."""


class InternalConsistencyError(CongruentError):
    """A self-check failed; indicates a bug rather than bad input."""


class SchemaError(CongruentError, KeyError):
    """Required columns are missing from a record set or file."""

    def __str__(self):
        return Exception.__str__(self)


class DataError(CongruentError, ValueError):
    """Input data cannot support the requested computation."""


class UndefinedAverageError(CongruentError, ZeroDivisionError):
    """An average was requested over an empty set."""


class DivergenceError(CongruentError, ArithmeticError):
    """An iterative optimiser produced a non-finite loss."""


class PrecisionAlert(CongruentError, ArithmeticError):
    """A numerical value is too far from the integer it should round to."""
