"""Benchmark orchestration: run the tracker over sequences, score, report.

Per sequence this produces the per-frame box/EMD/overlap table and the
success curve; a summary table collects averages. All outputs are
deterministic except the wall-clock fps column of the summary.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gyro import (
    HomographyState,
    gyro_homography,
    integrate_interval,
    predict_center,
    quaternion_to_rotation,
)
from .imageops import draw_box, save_frame
from .metrics import EvalResult, relative_overlap, success_curve
from .sequences import Sequence
from .tracker import BoundingBox, Tracker, TrackerConfig


@dataclass
class SequenceReport:
    """Tracking results and scores for one sequence."""

    name: str
    boxes: np.ndarray      # (frames, 4) x, y, w, h
    emds: np.ndarray       # (frames,)
    overlaps: np.ndarray   # one entry per ground-truth frame
    evaluation: EvalResult
    fps: float


def track_sequence(
    sequence: Sequence,
    config: TrackerConfig,
    use_gyro: bool = False,
    invert_rotation: bool = True,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Run the tracker over a sequence; returns boxes, EMDs, and fps.

    Frame 0 is initialized from ground truth. With ``use_gyro`` the seed
    for each frame is the gyro-predicted position of the previous center
    (prediction re-anchors every frame); otherwise the previous center
    seeds directly.
    """
    if sequence.ground_truth.shape[0] < 1:
        raise ValueError("sequence has no ground-truth initialization box")
    gyro_ready = use_gyro and sequence.has_gyro
    if use_gyro and not gyro_ready:
        raise ValueError(f"sequence {sequence.name} lacks gyro sidecar data")

    tracker = Tracker(config)
    frame0 = sequence.frame(0)
    init = BoundingBox.from_xywh(*sequence.ground_truth[0])
    tracker.initialize(frame0, init)

    boxes = [init.to_xywh()]
    emds = [0.0]
    started = time.perf_counter()
    for k in range(1, len(sequence)):
        frame = sequence.frame(k)
        seed = None
        if gyro_ready:
            quat = integrate_interval(
                sequence.gyro_log,
                float(sequence.frame_timestamps[k - 1]),
                float(sequence.frame_timestamps[k]),
            )
            hom = gyro_homography(sequence.intrinsics, quaternion_to_rotation(quat))
            _, seed = predict_center(
                HomographyState(), hom, tracker.state.box.center, invert_rotation
            )
            rows, cols = frame.shape
            seed = np.clip(seed, [0.0, 0.0], [cols - 1.0, rows - 1.0])
        box, emd = tracker.step(frame, seed_center=seed)
        boxes.append(box.to_xywh())
        emds.append(emd)
    elapsed = time.perf_counter() - started
    fps = (len(sequence) - 1) / elapsed if elapsed > 0 and len(sequence) > 1 else 0.0
    return np.asarray(boxes), np.asarray(emds), fps


def score_sequence(sequence: Sequence, boxes: np.ndarray) -> tuple[np.ndarray, EvalResult]:
    """Overlaps against ground truth (frames beyond it are excluded)."""
    count = min(sequence.ground_truth.shape[0], boxes.shape[0])
    overlaps = np.asarray([
        relative_overlap(
            BoundingBox.from_xywh(*boxes[k]),
            BoundingBox.from_xywh(*sequence.ground_truth[k]),
        )
        for k in range(count)
    ])
    return overlaps, success_curve(overlaps)


def run_benchmark(
    sequences,
    config: TrackerConfig,
    out_dir=None,
    annotate: bool = False,
    use_gyro: bool = False,
    invert_rotation: bool = True,
) -> list[SequenceReport]:
    """Track and score every sequence; write reports when out_dir is given."""
    reports = []
    for sequence in sequences:
        boxes, emds, fps = track_sequence(sequence, config, use_gyro, invert_rotation)
        overlaps, evaluation = score_sequence(sequence, boxes)
        report = SequenceReport(
            name=sequence.name, boxes=boxes, emds=emds,
            overlaps=overlaps, evaluation=evaluation, fps=fps,
        )
        reports.append(report)
        if out_dir is not None:
            write_sequence_report(report, out_dir)
            if annotate:
                _write_annotated_frames(sequence, boxes, out_dir)
    if out_dir is not None:
        write_summary(reports, out_dir)
    return reports


def write_sequence_report(report: SequenceReport, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frame_path = out_dir / f"{report.name}_frames.csv"
    with open(frame_path, "w", encoding="utf-8") as fh:
        fh.write("frame,x,y,w,h,emd,overlap\n")
        for k in range(report.boxes.shape[0]):
            x, y, w, h = report.boxes[k]
            overlap = f"{report.overlaps[k]:.6f}" if k < report.overlaps.size else ""
            fh.write(f"{k},{x:.4f},{y:.4f},{w:.4f},{h:.4f},"
                     f"{report.emds[k]:.6g},{overlap}\n")
    curve_path = out_dir / f"{report.name}_success.csv"
    with open(curve_path, "w", encoding="utf-8") as fh:
        fh.write("threshold,fraction\n")
        for t, frac in zip(report.evaluation.thresholds, report.evaluation.fractions):
            fh.write(f"{t:.2f},{frac:.6f}\n")


def write_summary(reports, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write("sequence,avg_overlap,frames,fps\n")
        for report in reports:
            fh.write(f"{report.name},{report.evaluation.average:.6f},"
                     f"{report.boxes.shape[0]},{report.fps:.2f}\n")


def summary_lines(reports) -> list[str]:
    lines = ["sequence,avg_overlap,frames,fps"]
    for report in reports:
        lines.append(f"{report.name},{report.evaluation.average:.6f},"
                     f"{report.boxes.shape[0]},{report.fps:.2f}")
    return lines


def _write_annotated_frames(sequence: Sequence, boxes: np.ndarray, out_dir) -> None:
    target = Path(out_dir) / "annotated" / sequence.name
    target.mkdir(parents=True, exist_ok=True)
    for k in range(len(sequence)):
        frame = draw_box(sequence.frame(k), *boxes[k])
        save_frame(target / f"{k + 1:04d}.png", frame)
