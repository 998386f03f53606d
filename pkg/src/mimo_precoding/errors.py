"""Exception types shared across the package."""


class MimoError(Exception):
    """Base class for all library errors."""


class DimensionError(MimoError):
    """Inconsistent or out-of-range matrix/system dimensions."""


class DegenerateChannelError(MimoError):
    """A channel is rank-deficient where a positive singular value is required."""


class UndefinedSinrError(MimoError):
    """SINR denominator is exactly zero (no interference and no effective noise)."""


class SingularMatrixError(MimoError):
    """A linear system that must be solved is singular."""


class ZeroPrecoderError(MimoError):
    """Power normalization was asked to scale an all-zero precoding matrix."""


class InfiniteSusinrError(MimoError):
    """Single-user SINR is unbounded because the noise power is zero."""


class NumericalFailureError(MimoError):
    """A numerical routine produced non-finite or contradictory values."""


class ChannelFileError(MimoError):
    """Malformed channel file. Carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConfigError(MimoError):
    """Invalid scenario or optimizer configuration."""
