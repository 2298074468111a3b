"""Exception hierarchy shared by the library and the command line."""


class CoincidenceError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CoincidenceError, ValueError):
    """A parameter lies outside the domain of an operation."""


class UndefinedPosteriorError(DomainError):
    pass


class DeadTimeSaturationError(DomainError):
    pass


class ConsistencyError(CoincidenceError, ArithmeticError):
    """An internal identity between derived quantities was violated."""


class ConfigError(CoincidenceError):
    pass


class TagFormatError(CoincidenceError):
    """Malformed tag file. ``offset`` is the record index or line number."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at {offset})"
        super().__init__(message)
        self.offset = offset


class NoiseDominatedWarning(UserWarning):
    """The coincidence excess is not significantly above the accidental floor."""
