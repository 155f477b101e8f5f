"""Grayscale image helpers: loading, bilinear sampling, window extraction."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import UnreadableImage

# ITU-R BT.601 luma weights; fixed so ingestion is bit-exact.
_LUMA = np.asarray([0.299, 0.587, 0.114])


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Float [0, 1] grayscale view of an RGB(A) or already-gray array."""
    image = np.asarray(image)
    if image.ndim == 3:
        image = image[..., :3].astype(float) @ _LUMA
    else:
        image = image.astype(float)
    if image.max() > 1.0:
        image = image / 255.0
    return np.clip(image, 0.0, 1.0)


def load_frame(path) -> np.ndarray:
    """Read an image file as float [0, 1] grayscale."""
    try:
        with Image.open(path) as img:
            data = np.asarray(img)
    except Exception as exc:
        raise UnreadableImage(f"cannot read {path}: {exc}") from exc
    return to_grayscale(data)


def save_frame(path, image: np.ndarray) -> None:
    """Write float [0, 1] grayscale to an 8-bit image file."""
    data = np.clip(np.asarray(image) * 255.0, 0.0, 255.0).round().astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample at float (x, y) positions with clamp-to-edge behavior."""
    h, w = image.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = image[y0, x0] * (1 - fx) + image[y0, x1] * fx
    bottom = image[y1, x0] * (1 - fx) + image[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def extract_window(
    image: np.ndarray, center, size, out_shape
) -> np.ndarray:
    """Resample a centered (width, height) region to ``out_shape``.

    ``size`` is (width, height) in image pixels; ``out_shape`` is
    (rows, cols). Samples outside the image clamp to the border.
    """
    out_h, out_w = out_shape
    width, height = float(size[0]), float(size[1])
    cx, cy = float(center[0]), float(center[1])
    xs = cx + (np.arange(out_w) - (out_w - 1) / 2.0) * (width / out_w)
    ys = cy + (np.arange(out_h) - (out_h - 1) / 2.0) * (height / out_h)
    grid_x, grid_y = np.meshgrid(xs, ys)
    return bilinear_sample(image, grid_x, grid_y)


def warp_homography(image: np.ndarray, matrix: np.ndarray, out_shape) -> np.ndarray:
    """Render an output image whose pixel p samples ``image`` at ``matrix @ p``."""
    out_h, out_w = out_shape
    grid_x, grid_y = np.meshgrid(np.arange(out_w, dtype=float),
                                 np.arange(out_h, dtype=float))
    ones = np.ones_like(grid_x)
    coords = np.stack([grid_x, grid_y, ones])
    mapped = np.tensordot(np.asarray(matrix, float), coords, axes=1)
    xs = mapped[0] / mapped[2]
    ys = mapped[1] / mapped[2]
    return bilinear_sample(image, xs, ys)


def draw_box(image: np.ndarray, x, y, w, h, value: float = 1.0) -> np.ndarray:
    """Burn a 1-px rectangle outline into a copy of the image."""
    out = image.copy()
    rows, cols = out.shape
    x0 = int(np.clip(round(x), 0, cols - 1))
    y0 = int(np.clip(round(y), 0, rows - 1))
    x1 = int(np.clip(round(x + w), 0, cols - 1))
    y1 = int(np.clip(round(y + h), 0, rows - 1))
    out[y0, x0 : x1 + 1] = value
    out[y1, x0 : x1 + 1] = value
    out[y0 : y1 + 1, x0] = value
    out[y0 : y1 + 1, x1] = value
    return out
