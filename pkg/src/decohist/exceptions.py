"""Exception hierarchy.

Validation problems subclass ``ValueError`` so plain callers can catch them
generically; numerical failures carry enough context to be reported by the
command line front end with exit status 3.
"""


class DecohistError(Exception):
    """Base class for all package errors."""


class ValidationError(DecohistError, ValueError):
    """An input violates a documented precondition."""


class ConfigError(ValidationError):
    """A scenario configuration file is malformed or references unknown keys."""

    def __init__(self, message, path=None, line=None, key=None):
        self.path = path
        self.line = line
        self.key = key
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NumericalError(DecohistError, RuntimeError):
    """A solver could not produce a trustworthy result."""


class BoundaryMassError(NumericalError):
    """Probability mass reached the edge of a phase-space grid."""


class StabilityError(NumericalError):
    """A step size violates the stability bound of a splitting scheme."""


class StepSizeError(ValidationError):
    """A requested time step is too coarse for the documented accuracy bound."""


class IndefiniteFormError(NumericalError):
    """A Gaussian integral is not convergent for the assembled quadratic form."""


class RecurrenceWarning(UserWarning):
    """Requested propagation time exceeds the recurrence time of a finite bath."""
