"""Exception hierarchy.

Input problems derive from :class:`DataError` (a ``ValueError``); failures of a
numerical procedure derive from :class:`NumericalError`. The CLI maps the two
families to distinct exit codes.
"""


class DMGSOError(Exception):
    """Base class for all package errors."""


class DataError(DMGSOError, ValueError):
    """Invalid or inconsistent input data."""


class NumericalError(DMGSOError, ArithmeticError):
    """A numerical procedure could not produce a valid result."""


# graph construction
class NotSymmetric(DataError):
    pass


class NegativeWeight(DataError):
    pass


class SelfLoop(DataError):
    pass


class TooSmall(DataError):
    pass


class IsolatedNode(DataError):
    pass


class BadCoordinates(DataError):
    pass


class Disconnected(DataError):
    pass


class NotConnected(DataError):
    pass


# bandwidth / spectra
class DegenerateData(DataError):
    pass


class BadTruncation(DataError):
    pass


class BadParams(DataError):
    pass


class NotErgodic(NumericalError):
    pass


class FilterPole(NumericalError):
    pass


# learning
class TooFewObservations(DataError):
    pass


class NotPSD(DataError):
    pass


# metrics
class ZeroRange(DataError):
    pass


class AllSkipped(NumericalError):
    pass


# ingestion
class ParseError(DataError):
    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class StationMismatch(DataError):
    pass
