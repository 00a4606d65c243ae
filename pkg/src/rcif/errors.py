"""Exception types shared across the library.

Every failure mode that callers are expected to handle gets its own class so
that tests and the CLI can distinguish, for example, a singular covariance
from a disconnected network without string matching.
"""


class RcifError(Exception):
    """Base class for all library errors."""


class DimensionError(RcifError, ValueError):
    """An input has an invalid or inconsistent dimension."""


class DecompositionError(RcifError, ArithmeticError):
    """A matrix factorization or inversion failed (input not positive
    definite even after jitter escalation)."""


class GeometryError(RcifError, ValueError):
    """A measurement function is undefined at the requested point
    (for example bearing at zero range)."""


class TopologyError(RcifError, ValueError):
    """A network graph violates a structural requirement
    (disconnected, overlapping roles, out-of-range node ids)."""


class ConfigError(RcifError, ValueError):
    """A scenario configuration failed to parse or validate."""
