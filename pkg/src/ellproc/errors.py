"""Exception hierarchy shared across the package."""


class EllprocError(Exception):
    """Base class for all package errors."""


class DomainError(EllprocError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class NumericalError(EllprocError, ArithmeticError):
    """A computation overflowed, underflowed or failed to converge."""


class KernelError(NumericalError):
    """The scale matrix could not be factorized, even after jitter."""


class DataError(EllprocError):
    """Input data is malformed or inconsistent with the model."""


class TrainingError(NumericalError):
    """Hyperparameter optimization failed."""


class NotFittedError(EllprocError):
    """A fitted model was required."""
