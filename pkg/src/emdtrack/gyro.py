"""Camera ego-rotation compensation from gyroscope rates.

Angular rates are integrated into a unit quaternion with a first-order
step, converted to a rotation matrix, and conjugated by the camera
intrinsics into an image-to-image homography. Accumulating those
homographies predicts where a static target lands in the next frame,
which seeds the tracker under fast camera motion.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyLog,
    NonUnitQuaternion,
    PointAtInfinity,
    SingularIntrinsics,
)

UNIT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion, scalar first."""

    m: float = 1.0
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.asarray([self.m, self.a, self.b, self.c])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def normalized(self) -> "Quaternion":
        n = self.norm
        if n == 0.0:
            raise NonUnitQuaternion("cannot normalize a zero quaternion")
        return Quaternion(self.m / n, self.a / n, self.b / n, self.c / n)


@dataclass(frozen=True)
class GyroSample:
    """One gyroscope reading: time in seconds, body rates in rad/s."""

    timestamp: float
    omega: tuple[float, float, float]

    def rates(self) -> np.ndarray:
        return np.asarray(self.omega, dtype=float)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsic matrix wrapper."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))
        if self.matrix.shape != (3, 3):
            raise DimensionMismatch("intrinsics must be a 3x3 matrix")
        if self.matrix[0, 0] <= 0 or self.matrix[1, 1] <= 0:
            raise SingularIntrinsics("focal lengths must be positive")
        if abs(np.linalg.det(self.matrix)) < 1e-12:
            raise SingularIntrinsics("intrinsic matrix is not invertible")

    @classmethod
    def from_params(cls, fx, fy, cx, cy, skew=0.0) -> "CameraIntrinsics":
        return cls(np.asarray([[fx, skew, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]]))

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


def _rate_matrix(omega: np.ndarray) -> np.ndarray:
    """4x4 quaternion rate matrix of a body angular velocity."""
    wx, wy, wz = omega
    return np.asarray(
        [
            [0.0, -wx, -wy, -wz],
            [wx, 0.0, wz, -wy],
            [wy, -wz, 0.0, wx],
            [wz, wy, -wx, 0.0],
        ]
    )


def integrate_step(q: Quaternion, omega, dt: float) -> Quaternion:
    """One Euler step of the quaternion kinematics, then renormalize."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    omega = np.asarray(omega, dtype=float)
    vec = q.as_array()
    vec = vec + 0.5 * (_rate_matrix(omega) @ vec) * dt
    return Quaternion(*vec).normalized()


def integrate_interval(samples, t0: float, t1: float) -> Quaternion:
    """Rotation over [t0, t1] by zero-order hold between gyro samples.

    The rate in force at any time is the latest sample at or before it;
    before the first sample the first rate is used (nearest-sample
    extrapolation). One Euler step is taken per sub-interval.
    """
    samples = list(samples)
    if not samples:
        raise EmptyLog("gyro log has no samples")
    if t1 < t0:
        raise ValueError("interval end precedes its start")
    times = np.asarray([s.timestamp for s in samples])
    if (np.diff(times) <= 0).any():
        raise ValueError("gyro timestamps must be strictly increasing")

    cuts = [t0] + [float(t) for t in times if t0 < t < t1] + [t1]
    q = Quaternion()
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        idx = int(np.searchsorted(times, lo, side="right")) - 1
        idx = max(idx, 0)
        q = integrate_step(q, samples[idx].rates(), hi - lo)
    return q


def quaternion_to_rotation(q: Quaternion) -> np.ndarray:
    """Rotation matrix of a unit quaternion."""
    if abs(q.norm - 1.0) > UNIT_NORM_TOL:
        raise NonUnitQuaternion(f"quaternion norm {q.norm!r} is not 1")
    m, a, b, c = q.m, q.a, q.b, q.c
    return np.asarray(
        [
            [1 - 2 * b * b - 2 * c * c, 2 * a * b - 2 * c * m, 2 * a * c + 2 * b * m],
            [2 * a * b + 2 * c * m, 1 - 2 * a * a - 2 * c * c, 2 * b * c - 2 * a * m],
            [2 * a * c - 2 * b * m, 2 * b * c + 2 * a * m, 1 - 2 * a * a - 2 * b * b],
        ]
    )


def gyro_homography(intrinsics: CameraIntrinsics, rotation: np.ndarray) -> np.ndarray:
    """Image-to-image map induced by a pure camera rotation."""
    return intrinsics.matrix @ np.asarray(rotation, dtype=float) @ intrinsics.inverse()


@dataclass
class HomographyState:
    """Accumulated inter-frame homography plus the latest predicted point."""

    h_accum: np.ndarray = field(default_factory=lambda: np.eye(3))
    point: np.ndarray = field(default_factory=lambda: np.asarray([0.0, 0.0, 1.0]))

    def __post_init__(self):
        self.h_accum = np.asarray(self.h_accum, dtype=float)
        self.point = np.asarray(self.point, dtype=float)


def predict_center(
    state: HomographyState,
    h_gyro: np.ndarray,
    point,
    invert_rotation: bool = True,
) -> tuple[HomographyState, np.ndarray]:
    """Advance the accumulated homography and predict the anchor's pixel.

    The accumulator is right-multiplied by the inverse of the per-frame
    homography and applied to the anchor point. ``invert_rotation=False``
    flips the convention for rigs whose gyro axes run the other way.
    """
    step = np.linalg.inv(h_gyro) if invert_rotation else np.asarray(h_gyro, float)
    h_new = state.h_accum @ step
    hom = h_new @ np.asarray([point[0], point[1], 1.0])
    if abs(hom[2]) < 1e-12:
        raise PointAtInfinity("predicted point has a vanishing homogeneous scale")
    state.h_accum = h_new
    state.point = hom
    return state, hom[:2] / hom[2]


# --- log and calibration files ---

def read_gyro_log(path) -> list[GyroSample]:
    """CSV gyro log: ``timestamp_s, wx, wy, wz`` per line (rad/s)."""
    samples = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            t, wx, wy, wz = (float(v) for v in row[:4])
            samples.append(GyroSample(timestamp=t, omega=(wx, wy, wz)))
    if not samples:
        raise EmptyLog(f"no gyro samples in {path}")
    return samples


def write_gyro_log(path, samples) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for s in samples:
            fh.write(f"{s.timestamp:.9f},{s.omega[0]:.12g},"
                     f"{s.omega[1]:.12g},{s.omega[2]:.12g}\n")


def read_intrinsics(path) -> CameraIntrinsics:
    """Nine whitespace-separated reals, row-major."""
    values = np.loadtxt(path).ravel()
    if values.size != 9:
        raise DimensionMismatch(f"intrinsics file must hold 9 values, got {values.size}")
    return CameraIntrinsics(values.reshape(3, 3))


def write_intrinsics(path, intrinsics: CameraIntrinsics) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in intrinsics.matrix:
            fh.write(" ".join(f"{v:.12g}" for v in row) + "\n")


def read_frame_timestamps(path) -> np.ndarray:
    """CSV ``frame_index, timestamp_s`` rows sorted by frame index."""
    pairs = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            pairs.append((int(row[0]), float(row[1])))
    pairs.sort()
    return np.asarray([t for _, t in pairs])


def write_frame_timestamps(path, timestamps) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for idx, t in enumerate(timestamps):
            fh.write(f"{idx},{t:.9f}\n")
