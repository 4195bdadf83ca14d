"""Tile feature extractors: raw pixels, HoG, and log-polar histograms.

Every extractor has a batched form operating on an (N, n, n) stack, which
is what dataset synthesis and conversion use; the single-tile functions
are thin wrappers over the batched code so both paths agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from glyphcast.core import DataError, FeatureMode, Tile

DEFAULT_RADIAL_BINS = 5
DEFAULT_ANGULAR_BINS = 12

HYS_CLIP = 0.2
HYS_EPS = 1e-6

TileLike = Union[Tile, np.ndarray]


def _values(t: TileLike) -> np.ndarray:
    arr = t.values if isinstance(t, Tile) else np.asarray(t, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DataError(f"expected a square tile, got shape {arr.shape}")
    return arr


def _stack(tiles: np.ndarray) -> np.ndarray:
    arr = np.asarray(tiles, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise DataError(f"expected an (N, n, n) tile stack, got shape {arr.shape}")
    return arr


# ============================================================
# Raw pixels
# ============================================================


def raw(t: TileLike) -> np.ndarray:
    return _values(t).ravel().copy()


def raw_batch(tiles: np.ndarray) -> np.ndarray:
    arr = _stack(tiles)
    return arr.reshape(arr.shape[0], -1).copy()


# ============================================================
# Histogram of oriented gradients
# ============================================================


@dataclass(frozen=True)
class HogConfig:
    cell_size: int = 5
    block: int = 1
    bins: int = 9

    def __post_init__(self) -> None:
        if self.cell_size < 1:
            raise DataError("HoG cell size must be >= 1")
        if self.block < 1:
            raise DataError("HoG block must span at least one cell")
        if self.bins < 2:
            raise DataError("HoG needs at least two orientation bins")

    @staticmethod
    def default_for(n: int) -> "HogConfig":
        """Two cells per side when n is even, otherwise a single cell."""

        cell = n // 2 if n % 2 == 0 else n
        return HogConfig(cell_size=max(cell, 1), block=1, bins=9)

    def cells_per_side(self, n: int) -> int:
        if n % self.cell_size != 0:
            raise DataError(
                f"cell size {self.cell_size} does not divide tile size {n}",
                error_type="cell_size",
            )
        cells = n // self.cell_size
        if self.block > cells:
            raise DataError(f"block of {self.block} cells exceeds {cells} cells per side")
        return cells

    def dim(self, n: int) -> int:
        cells = self.cells_per_side(n)
        blocks = cells - self.block + 1
        return blocks * blocks * self.block * self.block * self.bins


def _gradients(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # interior central differences; the outermost ring has zero gradient
    gx = np.zeros_like(stack)
    gy = np.zeros_like(stack)
    gx[:, :, 1:-1] = stack[:, :, 2:] - stack[:, :, :-2]
    gy[:, 1:-1, :] = stack[:, 2:, :] - stack[:, :-2, :]
    return gx, gy


def hog_batch(tiles: np.ndarray, cfg: Optional[HogConfig] = None) -> np.ndarray:
    stack = _stack(tiles)
    count, n, _ = stack.shape
    cfg = cfg or HogConfig.default_for(n)
    cells = cfg.cells_per_side(n)
    bins = cfg.bins

    gx, gy = _gradients(stack)
    magnitude = np.hypot(gx, gy)
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0

    # linear vote between the two nearest bin centres (centres at i*180/bins)
    pos = angle / (180.0 / bins)
    base = np.floor(pos)
    frac = pos - base
    lo = base.astype(np.int64) % bins
    hi = (lo + 1) % bins

    rows = np.arange(n) // cfg.cell_size
    cell_index = (rows[:, None] * cells + rows[None, :]).astype(np.int64)
    sample = np.arange(count, dtype=np.int64)[:, None, None]
    slot = (sample * cells * cells + cell_index[None, :, :]) * bins

    size = count * cells * cells * bins
    lo_votes = (magnitude * (1.0 - frac)).ravel()
    hi_votes = (magnitude * frac).ravel()
    hist = np.bincount((slot + lo).ravel(), weights=lo_votes, minlength=size)
    hist += np.bincount((slot + hi).ravel(), weights=hi_votes, minlength=size)
    hist = hist.reshape(count, cells, cells, bins)

    blocks = cells - cfg.block + 1
    out = np.empty((count, blocks, blocks, cfg.block * cfg.block * bins), dtype=np.float64)
    for by in range(blocks):
        for bx in range(blocks):
            v = hist[:, by : by + cfg.block, bx : bx + cfg.block, :].reshape(count, -1)
            v = v / np.sqrt(np.sum(v * v, axis=1, keepdims=True) + HYS_EPS**2)
            v = np.minimum(v, HYS_CLIP)
            out[:, by, bx, :] = v / np.sqrt(np.sum(v * v, axis=1, keepdims=True) + HYS_EPS**2)
    return out.reshape(count, -1)


def hog(t: TileLike, cfg: Optional[HogConfig] = None) -> np.ndarray:
    return hog_batch(_values(t)[None, :, :], cfg)[0]


# ============================================================
# Log-polar histogram
# ============================================================


@lru_cache(maxsize=32)
def _log_polar_bins(n: int, radial_bins: int, angular_bins: int) -> np.ndarray:
    """Bin index of every pixel centre, row-major."""

    centre = n / 2.0
    coords = np.arange(n, dtype=np.float64) + 0.5 - centre
    dy, dx = np.meshgrid(coords, coords, indexing="ij")
    r = np.hypot(dx, dy)
    theta = np.arctan2(-dy, dx) % (2.0 * np.pi)  # image rows grow downwards

    edges = np.geomspace(n / 8.0, n / np.sqrt(2.0), radial_bins)
    ring = np.minimum(np.searchsorted(edges, r.ravel(), side="right"), radial_bins - 1)
    sector = np.floor(theta.ravel() / (2.0 * np.pi / angular_bins)).astype(np.int64) % angular_bins

    bins = ring * angular_bins + sector
    bins.setflags(write=False)
    return bins


def log_polar_batch(
    tiles: np.ndarray,
    radial_bins: int = DEFAULT_RADIAL_BINS,
    angular_bins: int = DEFAULT_ANGULAR_BINS,
) -> np.ndarray:
    if radial_bins < 1 or angular_bins < 1:
        raise DataError("log-polar histograms need at least one radial and one angular bin")
    stack = _stack(tiles)
    count, n, _ = stack.shape
    width = radial_bins * angular_bins
    # bincount adds in pixel order, so a tile's histogram does not depend on the batch
    slots = np.arange(count)[:, None] * width + _log_polar_bins(n, radial_bins, angular_bins)
    hist = np.bincount(
        slots.ravel(), weights=stack.reshape(-1), minlength=count * width
    ).reshape(count, width)
    total = hist.sum(axis=1, keepdims=True)
    np.divide(hist, total, out=hist, where=total > 0)
    return hist


def log_polar_histogram(
    t: TileLike,
    radial_bins: int = DEFAULT_RADIAL_BINS,
    angular_bins: int = DEFAULT_ANGULAR_BINS,
) -> np.ndarray:
    return log_polar_batch(_values(t)[None, :, :], radial_bins, angular_bins)[0]


# ============================================================
# Dispatch
# ============================================================


def feature_dim(
    mode: FeatureMode,
    n: int,
    hog_cfg: Optional[HogConfig] = None,
    radial_bins: int = DEFAULT_RADIAL_BINS,
    angular_bins: int = DEFAULT_ANGULAR_BINS,
) -> int:
    mode = FeatureMode.parse(mode)
    if mode is FeatureMode.RAW:
        return n * n
    if mode is FeatureMode.HOG:
        return (hog_cfg or HogConfig.default_for(n)).dim(n)
    return radial_bins * angular_bins


def extract_batch(
    tiles: np.ndarray,
    mode: FeatureMode,
    *,
    hog_cfg: Optional[HogConfig] = None,
    radial_bins: int = DEFAULT_RADIAL_BINS,
    angular_bins: int = DEFAULT_ANGULAR_BINS,
) -> np.ndarray:
    """Features for an (N, n, n) stack as an (N, d) float64 matrix."""

    mode = FeatureMode.parse(mode)
    if mode is FeatureMode.RAW:
        return raw_batch(tiles)
    if mode is FeatureMode.HOG:
        return hog_batch(tiles, hog_cfg)
    return log_polar_batch(tiles, radial_bins, angular_bins)


def extract(
    t: TileLike,
    mode: FeatureMode,
    *,
    hog_cfg: Optional[HogConfig] = None,
    radial_bins: int = DEFAULT_RADIAL_BINS,
    angular_bins: int = DEFAULT_ANGULAR_BINS,
) -> np.ndarray:
    return extract_batch(
        _values(t)[None, :, :],
        mode,
        hog_cfg=hog_cfg,
        radial_bins=radial_bins,
        angular_bins=angular_bins,
    )[0]
