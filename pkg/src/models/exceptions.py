"""
Exception hierarchy shared by every simulator module.
"""


class SGSError(Exception):
    """Base class for all simulator errors."""


class StructuralError(SGSError):
    """Two shapes or vectors disagree on the number of layers."""


class ShapeValidationError(SGSError):
    """A shape, cached shape or elastic pick lies outside the SuperNet's bounds."""


class CapacityError(SGSError):
    """A SubGraph does not fit into the persistent buffer."""


class ConfigurationError(SGSError):
    """Inputs cannot form a valid configuration (empty sets, PB = 0, bad ratios...)."""


class TableLookupError(SGSError, KeyError):
    """Unknown SubNet or SubGraph id in a latency table."""

    def __str__(self) -> str:
        return Exception.__str__(self)


class StaleTableError(SGSError):
    """A latency table was built for different hardware than the one in use."""


class UndefinedRatioError(SGSError, ZeroDivisionError):
    """Cache-hit ratio requested for an all-zero SubNet vector."""


class AggregationError(SGSError):
    """Summary requested over an empty record stream."""
