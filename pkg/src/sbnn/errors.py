"""Exception types raised across the library."""


class SbnnError(Exception):
    """Base class for all library errors."""


class InvalidSign(SbnnError):
    """A value meant to be +1 or -1 is something else."""


class DimensionMismatch(SbnnError):
    """Operand shapes do not chain."""


class DegenerateLfsrState(SbnnError):
    """LFSR register reached the all-zero absorbing state."""


class InvalidPixel(SbnnError):
    """Input pixel outside [0, 1] beyond the clamping tolerance."""


class InvalidConfig(SbnnError):
    """Stochastic or training configuration out of range."""


class DegenerateBatchNorm(SbnnError):
    """Batch-norm scale is zero or negative."""


class NonFiniteWeight(SbnnError):
    """NaN or infinity in a weight matrix."""


class NonFiniteGradient(SbnnError):
    """NaN or infinity in a gradient."""


class EmptyBatch(SbnnError):
    """Batch-norm called on an empty batch."""


class InvalidLabel(SbnnError):
    """Target vector is not one-hot."""


class TrainingDiverged(SbnnError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class LayerTooWide(SbnnError):
    """A layer exceeds the 1024-neuron hardware limit."""


class GridCapacityExceeded(SbnnError):
    """Model weights do not fit the cell grid."""


class FormatError(SbnnError):
    """Bad magic, version, or structure in a file."""


class TruncatedError(SbnnError):
    """File ends before the declared payload."""


class LabelMismatch(SbnnError):
    """Image and label counts disagree."""


class ChecksumError(SbnnError):
    """Stored checksum does not match the payload."""
