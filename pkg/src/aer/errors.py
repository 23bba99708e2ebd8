"""Exception types raised by the library."""


class AerError(Exception):
    """Base class for all library errors."""


class DegenerateInputError(AerError):
    """Input too short or otherwise degenerate for the requested transform."""


class InsufficientDataError(AerError):
    """Not enough observations (or trainable windows) to proceed."""


class UnimputableChannelError(AerError):
    """A channel contains no finite samples, so its mean is undefined."""


class DimensionError(AerError):
    """Array shape does not match the model or series configuration."""


class AlignmentError(AerError):
    """A forecast sequence does not fit the index range it claims to cover."""


class CoverageError(AerError):
    """An index has no reconstructed value to aggregate."""


class TrainingDivergedError(AerError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")


class CheckpointError(AerError):
    """A model checkpoint could not be parsed or does not match the config."""


class ConfigError(AerError):
    """Invalid or unknown configuration values."""
