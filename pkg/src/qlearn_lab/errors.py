"""Exception types shared across the library.

Every error raised on purpose by qlearn_lab derives from :class:`QlearnError`,
so callers (and the CLI) can distinguish library failures from bugs.
"""


class QlearnError(Exception):
    """Base class for all qlearn_lab errors."""


class ShapeError(QlearnError):
    """Array dimensions are inconsistent with the requested operation."""


class CapacityError(QlearnError):
    """A computation would exceed the configured Hilbert-space dimension cap."""


class NumericalError(QlearnError):
    """A numerical routine failed to converge or to meet its residual target."""


class ConfigError(QlearnError):
    """Invalid configuration or invalid argument combination."""


class CopyExhausted(QlearnError):
    """A measurement requested more state copies than the ledger holds."""


class DegenerateStates(QlearnError):
    """The two states are too close for the requested construction."""


class DegeneratePhase(QlearnError):
    """An eigenphase sits inside the zero-tolerance band of phase estimation."""


class DataError(QlearnError):
    """Input data violates a validity requirement beyond repair tolerance."""


class InternalError(QlearnError):
    """Internal consistency identity violated; indicates inconsistent inputs."""
