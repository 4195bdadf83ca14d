"""Image loading, grayscale, aspect-corrected rescale, binarization and tiling."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from glyphcast.core import DataError, GrayImage

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)
DEFAULT_THRESHOLD = 128


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5)


def to_grayscale(rgb: np.ndarray) -> GrayImage:
    """Weighted luminance of an (h, w, 3) 8-bit RGB buffer."""

    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"expected an (height, width, 3) RGB buffer, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise DataError("empty image")
    luma = _round_half_up(arr.astype(np.float64) @ LUMA_WEIGHTS)
    return GrayImage(np.clip(luma, 0, 255).astype(np.uint8))


def load_image(path: Union[str, Path]) -> GrayImage:
    """Decode a PNG/JPEG (any mode) and return its luminance.

    Transparent pixels are composited over white, so line art exported with
    an alpha channel reads as dark strokes on a light page.
    """

    p = Path(path)
    try:
        with Image.open(p) as im:
            im.load()
            if im.mode in ("RGBA", "LA", "PA") or (im.mode == "P" and "transparency" in im.info):
                rgba = im.convert("RGBA")
                page = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
                rgb = Image.alpha_composite(page, rgba).convert("RGB")
            else:
                rgb = im.convert("RGB")
    except UnidentifiedImageError as exc:
        raise DataError(f"unreadable image: {p}", error_type="unreadable_image") from exc
    if rgb.width == 0 or rgb.height == 0:
        raise DataError("empty image")
    return to_grayscale(np.asarray(rgb, dtype=np.uint8))


def save_gray_png(img: GrayImage, path: Union[str, Path]) -> Path:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(img.pixels)).save(p, format="PNG")
    return p


def _axis_weights(src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # pixel-centre alignment; identical sizes map every sample onto itself
    pos = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    pos = np.clip(pos, 0.0, src - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, src - 1)
    frac = pos - lo
    return lo, hi, frac


def output_size(width: int, height: int, scale: float, aspect: bool = True) -> tuple[int, int]:
    """(width, height) after ``rescale``; height is halved when ``aspect`` is on."""

    if not scale > 0:
        raise DataError(f"scale must be positive, got {scale}")
    out_w = int(np.floor(width * scale + 0.5))
    out_h = int(np.floor(height * scale / (2.0 if aspect else 1.0) + 0.5))
    if out_w < 1 or out_h < 1:
        raise DataError(
            f"degenerate scale: {width}x{height} at scale {scale} gives {out_w}x{out_h}",
            error_type="degenerate_scale",
        )
    return out_w, out_h


def rescale(img: GrayImage, scale: float, aspect: bool = True) -> GrayImage:
    """Bilinear resample to ``round(w*scale)`` x ``round(h*scale/2)``.

    Monospace cells are about twice as tall as wide, so the height gets the
    extra factor of two unless ``aspect`` is False.
    """

    out_w, out_h = output_size(img.width, img.height, scale, aspect)
    if (out_w, out_h) == (img.width, img.height):
        return img
    src = img.pixels.astype(np.float64)
    y0, y1, fy = _axis_weights(img.height, out_h)
    x0, x1, fx = _axis_weights(img.width, out_w)
    top = src[y0][:, x0] * (1.0 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1.0 - fx) + src[y1][:, x1] * fx
    out = top * (1.0 - fy)[:, None] + bottom * fy[:, None]
    return GrayImage(np.clip(_round_half_up(out), 0, 255).astype(np.uint8))


def should_invert(img: GrayImage) -> bool:
    """Light strokes on a dark page are assumed when the mean is below mid-gray."""

    return float(img.pixels.mean()) < 128.0


def binarize_normalize(
    img: GrayImage,
    threshold: int = DEFAULT_THRESHOLD,
    invert: Optional[bool] = None,
) -> np.ndarray:
    """Map pixels to stroke (1.0) or background (0.0).

    ``invert=None`` picks the polarity with :func:`should_invert`.
    """

    if not 0 <= threshold <= 255:
        raise DataError(f"threshold must lie in [0, 255], got {threshold}")
    if invert is None:
        invert = should_invert(img)
    px = img.pixels
    stroke = px > threshold if invert else px < threshold
    return stroke.astype(np.float64)


def tile(grid: np.ndarray, n: int) -> np.ndarray:
    """Split a normalized grid into a (rows, cols, n, n) array of tiles.

    Partial tiles on the right and bottom edges are padded with background.
    """

    if n < 2:
        raise DataError(f"tile size must be >= 2, got {n}")
    values = np.asarray(grid, dtype=np.float64)
    if values.ndim != 2 or values.size == 0:
        raise DataError("empty image")
    height, width = values.shape
    rows = -(-height // n)
    cols = -(-width // n)
    padded = np.zeros((rows * n, cols * n), dtype=np.float64)
    padded[:height, :width] = values
    return padded.reshape(rows, n, cols, n).transpose(0, 2, 1, 3).copy()


def untile(tiles: np.ndarray, height: int, width: int) -> np.ndarray:
    """Reassemble ``tile`` output and crop the padding."""

    arr = np.asarray(tiles, dtype=np.float64)
    if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
        raise DataError(f"expected (rows, cols, n, n) tiles, got shape {arr.shape}")
    rows, cols, n, _ = arr.shape
    if height > rows * n or width > cols * n:
        raise DataError("crop larger than the tiled area")
    full = arr.transpose(0, 2, 1, 3).reshape(rows * n, cols * n)
    return full[:height, :width].copy()
