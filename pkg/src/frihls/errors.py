"""Exception hierarchy shared by every module.

All errors derive from :class:`FrihlsError`; the domain-type errors are also
``ValueError`` subclasses so that callers validating inputs the usual way keep
working.
"""


class FrihlsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FrihlsError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class SingularityError(DomainError):
    """Evaluation requested exactly at a kernel singularity."""


class PreconditionError(FrihlsError, ValueError):
    """A structural precondition (decay, sizing, coverage) does not hold."""


class ConditioningError(PreconditionError):
    """The neglected zero-mode mass of a spectral operation is too large."""

    def __init__(self, message, neglected_mass):
        super().__init__(message)
        self.neglected_mass = neglected_mass


class CoverageError(PreconditionError):
    """A kernel-regression estimate is starved of effective samples."""

    def __init__(self, message, starved_points=()):
        super().__init__(message)
        self.starved_points = list(starved_points)


class AccuracyError(FrihlsError, ArithmeticError):
    """A quadrature or inversion failed to reach its requested accuracy."""

    def __init__(self, message, estimates=()):
        super().__init__(message)
        self.estimates = tuple(estimates)


class BudgetError(FrihlsError, RuntimeError):
    """A configured resource or quadrature budget would be exceeded."""

    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required


class ScalingError(FrihlsError, ArithmeticError):
    """A ratio under- or overflowed; carries the offending grid cell."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell
