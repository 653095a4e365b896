"""Exception and warning hierarchy for the toolkit.

Hard contract violations raise; recoverable numerical fallbacks emit
warnings so pipelines keep running but the event stays observable.
"""


class FconnError(Exception):
    """Base class for all toolkit errors."""


class GridMismatch(FconnError):
    """Two grids differ in dims or voxel size where they must agree."""

    def __init__(self, a, b, context=""):
        self.a = a
        self.b = b
        msg = f"grid mismatch: {a} vs {b}"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)


class FormatError(FconnError):
    """File does not conform to the expected on-disk format."""


class DimensionError(FconnError):
    """Payload length disagrees with the header's dimension product."""


class NonFiniteError(FconnError):
    """NaN or Inf encountered where only finite values are allowed."""


class DuplicateSubject(FconnError):
    """A subject id appears more than once in a manifest."""


class BadLabel(FconnError):
    """A manifest label is outside {0, 1}."""


class ArchitectureMismatch(FconnError):
    """Checkpoint parameter blobs do not match the declared architecture."""


class BadBand(FconnError):
    """Band-pass upper edge exceeds the Nyquist frequency for the TR."""


class EmptyRoi(FconnError):
    """An ROI id in 1..R has no voxels."""


class LengthMismatch(FconnError):
    """Two series that must have equal length do not."""


class ShapeError(FconnError):
    """Tensor shapes are inconsistent with the requested operation."""


class ConfigError(FconnError):
    """A model or run configuration is invalid."""


class DataError(FconnError):
    """A dataset violates a training precondition (e.g. single class)."""


class DivergenceError(FconnError):
    """Training loss became non-finite."""


class TooFewSamples(FconnError):
    """Not enough samples per class to build the requested folds."""


class SingleClass(FconnError):
    """Both classes are required but only one is present."""


class SubjectOverlap(FconnError):
    """Test subjects overlap training subjects (leakage guard)."""


class TooManyRois(FconnError):
    """Requested parcel count cannot fit on the grid."""


class InvalidRoiCount(FconnError):
    """ROI count violates the atlas invariant (R >= 2)."""


class FconnWarning(UserWarning):
    """Base class for recoverable-event warnings."""


class DegenerateSeriesWarning(FconnWarning):
    """A zero-variance series was mapped to correlation 0."""


class DegenerateRegressorWarning(FconnWarning):
    """Global signal had zero variance; regressed on intercept only."""


class SingularSystemWarning(FconnWarning):
    """Normal equations were singular; jitter was added."""


class NonConvergenceWarning(FconnWarning):
    """Iterative solver hit its iteration cap; best iterate returned."""
