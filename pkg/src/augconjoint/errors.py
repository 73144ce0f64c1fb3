"""Exception hierarchy.

Validation problems (bad shapes, labels out of range, malformed files) derive
from :class:`DataValidationError`; numerical failures (identification,
non-convergence, separation, singular plug-in matrices) derive from
:class:`NumericalError`. The CLI maps the two families to distinct exit codes.
"""


class ChoiceModelError(Exception):
    """Base class for all package errors."""


class DataValidationError(ChoiceModelError, ValueError):
    """Inputs violate a shape, range or schema contract."""


class NumericalError(ChoiceModelError):
    """A numerical routine could not produce a trustworthy answer."""


class IdentificationError(NumericalError):
    """The design does not identify the coefficients (rank deficient)."""


class ConvergenceError(NumericalError):
    """An iterative fitter ran out of iterations."""


class SeparationError(ConvergenceError):
    """The likelihood has no finite maximizer (coefficients diverge)."""


class SingularMatrixError(NumericalError):
    """A matrix that must be inverted is singular or too ill-conditioned."""

    def __init__(self, message, condition_number=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number
