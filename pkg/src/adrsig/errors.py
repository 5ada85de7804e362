"""Exception hierarchy shared by every stage of the pipeline.

Each error carries a short ``tag`` (the class name) that the command line
prints as a machine-parseable prefix.
"""


class AdrError(Exception):
    """Base class for all pipeline errors."""

    @property
    def tag(self):
        return type(self).__name__


class MalformedCode(AdrError, ValueError):
    pass


class IoError(AdrError, OSError):
    pass


class FormatError(AdrError, ValueError):
    pass


class DuplicatePatientId(AdrError, ValueError):
    pass


class EmptyCohort(AdrError, ValueError):
    pass


class CohortTooSmall(AdrError, ValueError):
    pass


class ShapeMismatch(AdrError, ValueError):
    pass


class InvalidDf(AdrError, ValueError):
    pass


class ConvergenceError(AdrError, ArithmeticError):
    """The incomplete beta continued fraction did not converge."""


class InvalidSpec(AdrError, ValueError):
    pass


class ConfigError(AdrError, ValueError):
    pass
