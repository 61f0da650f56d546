"""Exception hierarchy. The CLI maps these onto process exit codes."""


class SelectorError(Exception):
    exit_code = 1


class ConfigError(SelectorError):
    exit_code = 2


class DataError(SelectorError):
    """Problems with input data: malformed files, broken invariants."""

    exit_code = 3


class FormatError(DataError):
    pass


class ParseError(DataError):
    pass


class IntegrityError(DataError):
    pass


class AlignmentError(DataError):
    pass


class CoverageError(DataError):
    pass


class DomainError(SelectorError, ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConstraintError(DomainError):
    pass


class FeatureError(SelectorError):
    """A landscape feature could not be computed for a design."""


class DegenerateFeatureError(FeatureError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = dict(partial or {})


class FitError(FeatureError):
    pass


class StatisticalPreconditionWarning(UserWarning):
    """Raised as a warning; escalated to exit code 4 under ``--strict``."""
