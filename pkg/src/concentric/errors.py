"""Exception types raised across the package."""


class ConcentricError(Exception):
    """Base class for all package errors."""


class DomainError(ConcentricError, ValueError):
    """An argument lies outside the domain of an operation."""


class CapacityError(DomainError):
    """The requested model needs more than 2**30 cells."""


class NonIdentifiableError(DomainError):
    """The parameter cannot be recovered from the given data."""


class UnsupportedError(ConcentricError, ValueError):
    """No closed form exists for the requested case."""


class UndefinedMeasureError(DomainError):
    def __init__(self, measure, reason="zero denominator"):
        self.measure = measure
        self.reason = reason
        super().__init__(f"{measure} is undefined: {reason}")


class PatternOverflowError(ConcentricError, OverflowError):
    """Exact integer cell values exceed the unsigned 64-bit range."""


class InconsistencyError(ConcentricError, ArithmeticError):
    """An inverse transform produced a non-normalized probability vector."""


class NumericalError(ConcentricError, ArithmeticError):
    """A non-finite value appeared where the model guarantees a finite one."""


class DataError(ConcentricError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
