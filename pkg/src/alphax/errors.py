"""Exception types raised across the package."""


class AlphaXError(Exception):
    """Base class for all errors raised by this package."""


class IllegalAction(AlphaXError):
    pass


class MalformedEncoding(AlphaXError):
    pass


class SpaceMismatch(AlphaXError):
    pass


class SpaceTooLarge(AlphaXError):
    pass


class EmptyPredictions(AlphaXError):
    pass


class UnknownArch(AlphaXError):
    pass


class DimensionMismatch(AlphaXError):
    pass


class DegenerateVariance(AlphaXError):
    pass


class InvalidArch(AlphaXError):
    pass


class MissingEntry(AlphaXError):
    pass


class ParseError(AlphaXError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidEncoding(ParseError):
    pass


class VersionMismatch(AlphaXError):
    pass


class CorruptSnapshot(AlphaXError):
    pass


class FrameError(AlphaXError):
    pass


class TransportFailure(AlphaXError):
    pass
