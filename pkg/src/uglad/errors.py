"""Exception hierarchy shared by every module."""


class UgladError(Exception):
    """Base class for all errors raised by the package."""


class NumericalError(UgladError):
    """A numerical routine failed (CLI exit code 4)."""


class NotPositiveDefinite(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class ShapeMismatch(UgladError, ValueError):
    pass


class LengthMismatch(UgladError, ValueError):
    pass


class DimensionMismatch(UgladError, ValueError):
    pass


class DataError(UgladError):
    """Problem with user data (CLI exit code 3)."""


class DegenerateData(DataError):
    def __init__(self, message, feature=None):
        super().__init__(message)
        self.feature = feature


class MissingData(DataError):
    pass


class EmptyColumn(DataError):
    def __init__(self, message, feature=None):
        super().__init__(message)
        self.feature = feature


class TooFewRows(DataError):
    pass


class DegenerateLabels(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class InvalidArgument(UgladError, ValueError):
    pass


class InvalidThreshold(InvalidArgument):
    pass
