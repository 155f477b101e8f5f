"""Sequence ingestion and synthetic sequence generation.

Disk sequences follow the common benchmark layout: an ``img/`` directory
of numbered frames plus ``groundtruth_rect.txt`` with one ``x,y,w,h`` box
per line (comma, tab, or space separated), optionally ``attrs.txt`` and
the gyro sidecar files. Synthetic sequences render either a translating
textured patch or a whole-scene camera rotation with an exact gyro log,
so they double as tracking oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MissingGroundTruth, SpecOutOfBounds, UnreadableImage
from .gyro import (
    CameraIntrinsics,
    GyroSample,
    Quaternion,
    gyro_homography,
    integrate_step,
    quaternion_to_rotation,
    read_frame_timestamps,
    read_gyro_log,
    read_intrinsics,
    write_frame_timestamps,
    write_gyro_log,
    write_intrinsics,
)
from .imageops import load_frame, save_frame, warp_homography

_IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp")
KNOWN_ATTRIBUTES = ("IV", "SV", "OCC", "DEF", "MB", "FM", "BC")


@dataclass
class Sequence:
    """Frames (paths or in-memory arrays) with ground truth and sidecars."""

    name: str
    frames: list
    ground_truth: np.ndarray  # (G, 4) x, y, w, h with top-left origin
    attributes: frozenset = frozenset()
    gyro_log: list | None = None
    frame_timestamps: np.ndarray | None = None
    intrinsics: CameraIntrinsics | None = None

    def __post_init__(self):
        self.ground_truth = np.asarray(self.ground_truth, dtype=float)
        if len(self.frames) < 1:
            raise ValueError("sequence needs at least one frame")
        if self.ground_truth.ndim != 2 or self.ground_truth.shape[1] != 4:
            raise ValueError("ground truth must be (frames, 4)")
        if self.ground_truth.shape[0] > len(self.frames):
            raise ValueError("more ground-truth boxes than frames")
        if (self.ground_truth[:, 2:] <= 0).any():
            raise ValueError("ground-truth boxes must have positive size")

    def __len__(self) -> int:
        return len(self.frames)

    def frame(self, index: int) -> np.ndarray:
        """Frame ``index`` as float [0, 1] grayscale."""
        entry = self.frames[index]
        if isinstance(entry, np.ndarray):
            return entry
        return load_frame(entry)

    @property
    def has_gyro(self) -> bool:
        return (self.gyro_log is not None
                and self.frame_timestamps is not None
                and self.intrinsics is not None)


def load_sequence(directory) -> Sequence:
    """Read a sequence directory in the benchmark layout."""
    directory = Path(directory)
    if not directory.is_dir():
        raise UnreadableImage(f"{directory} is not a sequence directory")
    img_dir = directory / "img" if (directory / "img").is_dir() else directory
    frames = sorted(
        p for p in img_dir.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES
    )
    if not frames:
        raise UnreadableImage(f"no frame images under {img_dir}")
    gt_path = directory / "groundtruth_rect.txt"
    if not gt_path.is_file():
        raise MissingGroundTruth(f"{gt_path} does not exist")
    rows = []
    for line in gt_path.read_text().splitlines():
        line = line.strip().replace(",", " ").replace("\t", " ")
        if not line:
            continue
        rows.append([float(tok) for tok in line.split()[:4]])
    ground_truth = np.asarray(rows, dtype=float)

    attributes = frozenset()
    attr_path = directory / "attrs.txt"
    if attr_path.is_file():
        tokens = attr_path.read_text().replace(",", " ").split()
        attributes = frozenset(t.upper() for t in tokens)

    gyro_log = timestamps = intrinsics = None
    if (directory / "gyro.csv").is_file():
        gyro_log = read_gyro_log(directory / "gyro.csv")
    if (directory / "timestamps.csv").is_file():
        timestamps = read_frame_timestamps(directory / "timestamps.csv")
    if (directory / "intrinsics.txt").is_file():
        intrinsics = read_intrinsics(directory / "intrinsics.txt")

    load_frame(frames[0])  # fail fast on unreadable data
    return Sequence(
        name=directory.name,
        frames=frames,
        ground_truth=ground_truth,
        attributes=attributes,
        gyro_log=gyro_log,
        frame_timestamps=timestamps,
        intrinsics=intrinsics,
    )


def write_sequence(sequence: Sequence, directory) -> None:
    """Write a sequence (frames must be in memory) in the benchmark layout."""
    directory = Path(directory)
    img_dir = directory / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    for idx in range(len(sequence)):
        save_frame(img_dir / f"{idx + 1:04d}.png", sequence.frame(idx))
    with open(directory / "groundtruth_rect.txt", "w", encoding="utf-8") as fh:
        for x, y, w, h in sequence.ground_truth:
            fh.write(f"{x:.4f},{y:.4f},{w:.4f},{h:.4f}\n")
    if sequence.attributes:
        (directory / "attrs.txt").write_text(" ".join(sorted(sequence.attributes)) + "\n")
    if sequence.gyro_log is not None:
        write_gyro_log(directory / "gyro.csv", sequence.gyro_log)
    if sequence.frame_timestamps is not None:
        write_frame_timestamps(directory / "timestamps.csv", sequence.frame_timestamps)
    if sequence.intrinsics is not None:
        write_intrinsics(directory / "intrinsics.txt", sequence.intrinsics)


@dataclass(frozen=True)
class SynthSpec:
    """Description of a synthetic sequence.

    ``kind`` is ``translation`` (textured patch moving over a flat
    background) or ``rotation`` (whole-scene warp from a rotating camera
    with an exact gyro log).
    """

    kind: str = "translation"
    frames: int = 100
    height: int = 120
    width: int = 160
    target_width: int = 40
    target_height: int = 40
    start_x: float = 20.0
    start_y: float = 40.0
    velocity_x: float = 2.0
    velocity_y: float = 0.0
    brightness_amplitude: float = 0.0
    seed: int = 0
    # rotation-only fields
    fps: float = 30.0
    gyro_rate_hz: float = 200.0
    pan_dps: float = 0.0
    tilt_dps: float = 0.0
    roll_dps: float = 0.0
    fx: float = 600.0
    fy: float = 600.0
    cx: float | None = None
    cy: float | None = None

    def __post_init__(self):
        if self.kind not in ("translation", "rotation"):
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")

    def intrinsics(self) -> CameraIntrinsics:
        cx = (self.width - 1) / 2.0 if self.cx is None else self.cx
        cy = (self.height - 1) / 2.0 if self.cy is None else self.cy
        return CameraIntrinsics.from_params(self.fx, self.fy, cx, cy)


def _smooth_texture(rng, height, width, passes=2):
    """High-contrast texture with local structure (box-blurred noise)."""
    tex = rng.random((height, width))
    for _ in range(passes):
        tex = (tex + np.roll(tex, 1, axis=0) + np.roll(tex, 1, axis=1)
               + np.roll(tex, -1, axis=0) + np.roll(tex, -1, axis=1)) / 5.0
    tex -= tex.min()
    peak = tex.max()
    return tex / peak if peak > 0 else tex


def _brightness_factor(spec: SynthSpec, index: int) -> float:
    if spec.brightness_amplitude == 0.0 or spec.frames == 1:
        return 1.0
    phase = 2.0 * np.pi * index / (spec.frames - 1)
    return 1.0 + spec.brightness_amplitude * np.sin(phase)


def make_synthetic_sequence(spec: SynthSpec) -> Sequence:
    if spec.kind == "translation":
        return _make_translation_sequence(spec)
    return _make_rotation_sequence(spec)


def _make_translation_sequence(spec: SynthSpec) -> Sequence:
    rng = np.random.default_rng(spec.seed)
    background = 0.45 + 0.08 * (_smooth_texture(rng, spec.height, spec.width, 4) - 0.5)
    patch = _smooth_texture(rng, spec.target_height, spec.target_width)

    frames = []
    boxes = []
    for k in range(spec.frames):
        x = spec.start_x + k * spec.velocity_x
        y = spec.start_y + k * spec.velocity_y
        xi, yi = int(round(x)), int(round(y))
        if xi < 0 or yi < 0 or xi + spec.target_width > spec.width \
                or yi + spec.target_height > spec.height:
            raise SpecOutOfBounds(f"target leaves the frame at index {k}")
        frame = background.copy()
        frame[yi : yi + spec.target_height, xi : xi + spec.target_width] = patch
        frame = np.clip(frame * _brightness_factor(spec, k), 0.0, 1.0)
        frames.append(frame)
        boxes.append([xi, yi, spec.target_width, spec.target_height])

    return Sequence(
        name=f"synth-translation-{spec.seed}",
        frames=frames,
        ground_truth=np.asarray(boxes, dtype=float),
        attributes=frozenset({"SV"}) if spec.brightness_amplitude else frozenset(),
    )


def _rotation_rates(spec: SynthSpec) -> np.ndarray:
    return np.deg2rad([spec.pan_dps, spec.tilt_dps, spec.roll_dps])


def _make_rotation_sequence(spec: SynthSpec) -> Sequence:
    """Scene warped by the accumulated inverse gyro homography per frame.

    Scene points move by the inverse of the per-frame rotation homography,
    matching the prediction chain's convention, so the generated gyro log
    is an exact oracle for gyro-aided seeding.
    """
    rng = np.random.default_rng(spec.seed)
    scene = _smooth_texture(rng, spec.height, spec.width)
    intr = spec.intrinsics()
    omega = _rotation_rates(spec)
    frame_dt = 1.0 / spec.fps

    # Fine-grained truth integration (20x the gyro rate).
    substeps = max(int(round(20.0 * spec.gyro_rate_hz * frame_dt)), 1)
    sub_dt = frame_dt / substeps

    h_cum = np.eye(3)
    frames = [scene.copy()]
    centers = [np.asarray([spec.start_x + spec.target_width / 2.0,
                           spec.start_y + spec.target_height / 2.0])]
    for _ in range(spec.frames - 1):
        q = Quaternion()
        for _ in range(substeps):
            q = integrate_step(q, omega, sub_dt)
        step_h = gyro_homography(intr, quaternion_to_rotation(q))
        h_cum = h_cum @ np.linalg.inv(step_h)
        # frame pixels sample the base scene at the inverse cumulative map
        frames.append(warp_homography(scene, np.linalg.inv(h_cum),
                                      (spec.height, spec.width)))
        hom = h_cum @ np.asarray([centers[0][0], centers[0][1], 1.0])
        centers.append(hom[:2] / hom[2])

    boxes = []
    for k, center in enumerate(centers):
        x = center[0] - spec.target_width / 2.0
        y = center[1] - spec.target_height / 2.0
        if x < 0 or y < 0 or x + spec.target_width > spec.width \
                or y + spec.target_height > spec.height:
            raise SpecOutOfBounds(f"target leaves the frame at index {k}")
        boxes.append([x, y, spec.target_width, spec.target_height])

    times = np.arange(spec.frames) * frame_dt
    n_samples = int(np.ceil(times[-1] * spec.gyro_rate_hz)) + 1 if spec.frames > 1 else 1
    log = [
        GyroSample(timestamp=i / spec.gyro_rate_hz, omega=tuple(omega))
        for i in range(n_samples)
    ]
    return Sequence(
        name=f"synth-rotation-{spec.seed}",
        frames=frames,
        ground_truth=np.asarray(boxes, dtype=float),
        attributes=frozenset({"FM"}),
        gyro_log=log,
        frame_timestamps=times,
        intrinsics=intr,
    )


def synth_spec_from_mapping(mapping: dict) -> SynthSpec:
    """Build a SynthSpec from string key/value pairs (config file form)."""
    import dataclasses

    kwargs = {}
    valid = {f.name: f for f in dataclasses.fields(SynthSpec)}
    for key, raw in mapping.items():
        if key not in valid:
            raise ValueError(f"unknown synthetic spec key {key!r}")
        if key == "kind":
            kwargs[key] = raw.strip()
        elif key in ("frames", "height", "width", "target_width",
                     "target_height", "seed"):
            kwargs[key] = int(raw)
        else:
            kwargs[key] = float(raw)
    return SynthSpec(**kwargs)
