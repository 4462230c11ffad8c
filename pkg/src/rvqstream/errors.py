"""Exception types shared across the package."""


class RvqStreamError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RvqStreamError, ValueError):
    pass


class CodeRangeError(RvqStreamError, IndexError):
    pass


class InsufficientDataError(RvqStreamError, ValueError):
    pass


class ConfigError(RvqStreamError, ValueError):
    pass


class ModelContractError(RvqStreamError):
    """A step model produced a code outside its codebook range."""


class MaxStepsExceeded(RvqStreamError):
    pass


class NoPacketError(RvqStreamError, ValueError):
    pass


class FormatError(RvqStreamError, ValueError):
    """A file did not match the expected binary or JSON layout."""
