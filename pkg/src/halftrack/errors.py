"""Exception types raised across the package."""


class HalftrackError(ValueError):
    """Base class for validation and solver errors."""


class TokenCountMismatch(HalftrackError):
    pass


class NonPositivePrice(HalftrackError):
    pass


class MalformedNumber(HalftrackError):
    pass


class InvalidPanel(HalftrackError):
    pass


class BadSplit(HalftrackError):
    pass


class DimensionMismatch(HalftrackError):
    pass


class ZeroMatrix(HalftrackError):
    pass


class NegativeParameter(HalftrackError):
    pass


class KOutOfRange(HalftrackError):
    pass


class InfeasibleConfig(HalftrackError):
    pass


class InfeasibleBounds(HalftrackError):
    pass


class TooLarge(HalftrackError):
    pass


class ZeroBaseline(HalftrackError):
    pass


class IoFailure(HalftrackError):
    pass
