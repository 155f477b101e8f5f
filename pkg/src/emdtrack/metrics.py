"""Overlap metric and success curves for tracking evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBox
from .tracker import BoundingBox


@dataclass
class EvalResult:
    """Per-frame overlaps plus the derived success curve."""

    overlaps: np.ndarray
    average: float
    thresholds: np.ndarray
    fractions: np.ndarray


def default_thresholds() -> np.ndarray:
    """101-point grid from 0.00 to 1.00 in 0.01 steps."""
    return np.linspace(0.0, 1.0, 101)


def relative_overlap(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area of two axis-aligned boxes."""
    for box in (a, b):
        if box.width <= 0 or box.height <= 0:
            raise DegenerateBox(f"box {box} has non-positive size")
    ax0, ay0, aw, ah = a.to_xywh()
    bx0, by0, bw, bh = b.to_xywh()
    ix = min(ax0 + aw, bx0 + bw) - max(ax0, bx0)
    iy = min(ay0 + ah, by0 + bh) - max(ay0, by0)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return float(inter / union)


def success_curve(overlaps, thresholds=None) -> EvalResult:
    """Fraction of frames whose overlap strictly exceeds each threshold."""
    overlaps = np.asarray(overlaps, dtype=float)
    thresholds = default_thresholds() if thresholds is None else np.asarray(thresholds, float)
    fractions = (overlaps[None, :] > thresholds[:, None]).mean(axis=1)
    return EvalResult(
        overlaps=overlaps,
        average=float(overlaps.mean()),
        thresholds=thresholds,
        fractions=fractions,
    )
