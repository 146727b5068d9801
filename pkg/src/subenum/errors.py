"""Exception types shared across the package."""


class SubenumError(Exception):
    """Base class for all errors raised by this package."""


class UnknownVertex(SubenumError, KeyError):
    pass


class MissingAdjacency(SubenumError):
    pass


class PatternError(SubenumError, ValueError):
    pass


class Disconnected(PatternError):
    pass


class SelfLoop(PatternError):
    pass


class DuplicateEdge(PatternError):
    pass


class PatternTooLarge(PatternError):
    pass


class NotAPlan(SubenumError, ValueError):
    pass


class StaleId(SubenumError, KeyError):
    pass


class MissingVerdict(SubenumError, KeyError):
    pass


class ZeroDegree(SubenumError, ValueError):
    pass


class TransportFailure(SubenumError):
    pass


class ProtocolError(TransportFailure):
    """Malformed or unexpected frame on a connection."""


class OwnerUnknown(SubenumError, KeyError):
    pass


class NotOwner(SubenumError):
    pass


class ParseError(SubenumError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LengthMismatch(ParseError):
    pass


class BadPartId(ParseError):
    pass
