"""Exception types shared across the package."""


class FootfallError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(FootfallError, ValueError):
    pass


class EmptyWalkError(FootfallError):
    pass


class EmptyCodeError(FootfallError):
    pass


class DegenerateEventError(FootfallError):
    """Raised when an event has zero variance and moments are undefined."""


class DegenerateTrainingError(FootfallError):
    pass


class InvalidInputError(FootfallError, ValueError):
    pass


class EncodingOverflowError(FootfallError):
    pass


class MalformedDatagramError(FootfallError):
    pass


class CorruptEventError(FootfallError):
    pass


class ModelFormatError(FootfallError):
    pass
