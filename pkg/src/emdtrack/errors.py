"""Exception types raised across the package."""


class EmdTrackError(Exception):
    """Base class for all package-specific errors."""


# --- transport / EMD solver ---

class InfeasibleBalance(EmdTrackError):
    """Supplies and demands do not carry equal (unit) total mass."""


class CycleLimitExceeded(EmdTrackError):
    """Simplex pivot count exceeded its cap; degeneracy handling failed."""


class SingularBasis(EmdTrackError):
    """Basis cells do not form a usable spanning tree."""


class DimensionMismatch(EmdTrackError):
    """Vector or matrix sizes do not match the expected layout."""


# --- appearance model ---

class EmptyTemplateSet(EmdTrackError):
    """Dictionary construction was given no templates."""


class PatchLargerThanWindow(EmdTrackError):
    """Patch size exceeds the normalized window size."""


class NonConvergence(EmdTrackError):
    """Iterative solver failed to reach its stationarity tolerance."""


class NormalizationDegenerate(EmdTrackError):
    """All histogram or kernel contributions are zero; cannot normalize."""


class FeatureDimMismatch(EmdTrackError):
    """Signature feature vectors have different lengths."""


# --- tracker ---

class OutOfFrame(EmdTrackError):
    """Every candidate window left the image."""


# --- gyro ---

class NonUnitQuaternion(EmdTrackError):
    """Quaternion norm deviates too far from one."""


class SingularIntrinsics(EmdTrackError):
    """Camera intrinsic matrix is not invertible."""


class PointAtInfinity(EmdTrackError):
    """Homogeneous point cannot be dehomogenized."""


class EmptyLog(EmdTrackError):
    """Gyro log contains no samples."""


# --- harness ---

class MissingGroundTruth(EmdTrackError):
    """Sequence directory has no ground-truth file."""


class UnreadableImage(EmdTrackError):
    """A frame image could not be read."""


class DegenerateBox(EmdTrackError):
    """Bounding box has non-positive width or height."""


class SpecOutOfBounds(EmdTrackError):
    """Synthetic motion would push the target outside the frame."""
