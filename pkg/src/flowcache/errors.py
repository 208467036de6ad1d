"""Exception types shared across the package."""

from __future__ import annotations


class FlowCacheError(Exception):
    """Base class for all flowcache errors."""


class InvalidArgumentError(FlowCacheError, ValueError):
    """An argument violates an operation's contract."""


class NumericDomainError(FlowCacheError, ValueError):
    """Non-finite values were passed where finite reals are required."""


class DegenerateVelocityError(FlowCacheError):
    """A zero-norm velocity where a reference direction is needed."""


class DegenerateDirectionError(FlowCacheError):
    """Orthogonal residual too small to define a unit direction.

    Callers treat this as a signal to zero the directional update rather
    than as a failure.
    """


class BundleFormatError(FlowCacheError, ValueError):
    """A calibration bundle file failed schema validation."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
