"""Exception types raised across the package."""


class HmacSimError(Exception):
    """Base class for all simulator errors."""


class ConfigurationError(HmacSimError, ValueError):
    """An experiment or protocol parameter is out of its valid range."""


class MonotonicClockError(HmacSimError, ValueError):
    """A packet arrival was stamped earlier than its previous arrival."""


class OvertraversalError(HmacSimError, ValueError):
    """A packet was forwarded past its destination."""


class NoThresholdError(HmacSimError, ValueError):
    """Delay threshold requested for a packet with no remaining hops."""


class UndefinedRateError(HmacSimError, ZeroDivisionError):
    """A rate or ratio was requested over an empty interval or population."""


class ComparisonError(HmacSimError, ValueError):
    """Two runs cannot be compared because their configurations differ."""
