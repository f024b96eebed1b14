"""Exception hierarchy shared by all ergoflow modules."""


class ErgoflowError(Exception):
    """Base class for every error raised by this package."""


class Undecided(ErgoflowError):
    """Interval refinement could not separate two forms whose coefficient
    vectors differ; usually an undeclared multiplicative relation."""


class EnumerationTooLarge(ErgoflowError):
    pass


class ResidueMismatch(ErgoflowError):
    """The two strings are not in the same mod-3 class."""


class Boundary(ErgoflowError):
    """The orbit walk left the finite truncation depth."""


class TimeOutOfRange(ErgoflowError):
    pass


class PrefixTooShort(ErgoflowError):
    """The odometer carry position is not determined by the digits given."""


class DepthExceeded(ErgoflowError):
    pass


class InfeasibleModel(ErgoflowError):
    pass


class ValidationError(ErgoflowError, ValueError):
    pass


class ParseError(ErgoflowError, ValueError):
    pass
