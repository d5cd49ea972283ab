"""Exception hierarchy shared by every engine."""


class AcrError(Exception):
    """Base class for all errors raised by etacr."""


class InvalidParameter(AcrError, ValueError):
    """A scalar argument is outside its admissible range.

    ``field`` names the offending parameter so front ends can report it.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class InvalidGrid(AcrError, ValueError):
    """Grid geometry cannot represent the requested density."""


class DegenerateTruncation(AcrError, RuntimeError):
    """Truncation left (numerically) no probability mass.

    Usually means the threshold sits far in the tail of the density.
    """
