"""Image -> AsciiGrid conversion, text output and glyph rendering."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from glyphcast.classify import predict_batch
from glyphcast.core import AsciiGrid, Charset, DataError, GrayImage, ModelArtifact, validate
from glyphcast.features import DEFAULT_ANGULAR_BINS, DEFAULT_RADIAL_BINS, extract_batch
from glyphcast.glyphset import DEFAULT_TILE_SIZE, glyph_stack, glyph_to_pixels
from glyphcast.preprocess import DEFAULT_THRESHOLD, binarize_normalize, rescale, tile

TONE_RAMP = " .:-=+*#%@"


@dataclass(frozen=True)
class ConvertOptions:
    scale: float = 1.0
    threshold: int = DEFAULT_THRESHOLD
    invert: Optional[bool] = None
    aspect: bool = True
    threads: Optional[int] = None


def _classify_tiles(tiles: np.ndarray, m: ModelArtifact) -> np.ndarray:
    hp = m.hyperparams
    feats = extract_batch(
        tiles,
        m.feature_mode,
        radial_bins=int(hp.get("radial_bins", DEFAULT_RADIAL_BINS)),
        angular_bins=int(hp.get("angular_bins", DEFAULT_ANGULAR_BINS)),
    )
    return predict_batch(m, feats)


def convert_image(
    img: GrayImage,
    m: ModelArtifact,
    scale: float = 1.0,
    *,
    threshold: int = DEFAULT_THRESHOLD,
    invert: Optional[bool] = None,
    aspect: bool = True,
    threads: Optional[int] = None,
) -> AsciiGrid:
    """Rescale, binarize, tile and classify ``img`` with ``m``.

    Tiles without a single stroke pixel are emitted as space without
    consulting the model. With ``threads`` the remaining tiles are split
    into contiguous chunks; the grid equals the serial result.
    """

    n = m.tile_size
    if n < 2:
        raise DataError(f"model tile size must be >= 2, got {n}")
    scaled = rescale(img, scale, aspect=aspect)
    values = binarize_normalize(scaled, threshold=threshold, invert=invert)
    tiles = tile(values, n)
    rows, cols = tiles.shape[:2]
    flat = tiles.reshape(rows * cols, n, n)

    cells = np.full(rows * cols, m.charset.space_index, dtype=np.int64)
    inked = np.flatnonzero(flat.any(axis=(1, 2)))
    if inked.size:
        todo = flat[inked]
        workers = max(1, int(threads or 1))
        if workers == 1 or inked.size < 2 * workers:
            cells[inked] = _classify_tiles(todo, m)
        else:
            chunks = np.array_split(todo, workers)
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(lambda c: _classify_tiles(c, m), chunks))
            cells[inked] = np.concatenate(parts)
    return AsciiGrid(rows=rows, cols=cols, cells=cells, charset=m.charset)


def convert_with(img: GrayImage, m: ModelArtifact, options: ConvertOptions) -> AsciiGrid:
    return convert_image(
        img,
        m,
        options.scale,
        threshold=options.threshold,
        invert=options.invert,
        aspect=options.aspect,
        threads=options.threads,
    )


def _checked(g: AsciiGrid) -> AsciiGrid:
    problem = validate(g)
    if problem is not None:
        raise DataError(f"invalid grid: {problem}")
    return g


def grid_to_text(g: AsciiGrid) -> str:
    """Rows joined with LF; no trailing newline."""

    _checked(g)
    chars = np.array([chr(c) for c in g.charset.codes])
    matrix = chars[g.as_matrix()]
    return "\n".join("".join(row) for row in matrix)


def grid_to_image(g: AsciiGrid, n: int = DEFAULT_TILE_SIZE) -> GrayImage:
    """Render each cell's glyph as dark strokes on white; size (rows*n, cols*n)."""

    _checked(g)
    glyphs = glyph_to_pixels(glyph_stack(g.charset, n))
    cells = glyphs[g.as_matrix()]  # (rows, cols, n, n)
    return GrayImage(cells.transpose(0, 2, 1, 3).reshape(g.rows * n, g.cols * n))


def crop_to(img: GrayImage, height: int, width: int) -> GrayImage:
    if height > img.height or width > img.width:
        raise DataError(f"cannot crop {img.width}x{img.height} to {width}x{height}")
    return GrayImage(img.pixels[:height, :width])


def render_like(g: AsciiGrid, reference: GrayImage, n: int = DEFAULT_TILE_SIZE) -> GrayImage:
    """Render ``g`` and crop the tile padding to ``reference``'s geometry."""

    return crop_to(grid_to_image(g, n), reference.height, reference.width)


def tone_convert(
    img: GrayImage,
    charset: Optional[Charset] = None,
    n: int = DEFAULT_TILE_SIZE,
    ramp: str = TONE_RAMP,
    *,
    scale: float = 1.0,
    aspect: bool = True,
) -> AsciiGrid:
    """Tone-based baseline: mean tile darkness picks a character from ``ramp``."""

    cs = charset or Charset.default()
    if not ramp:
        raise DataError("tone ramp must not be empty")
    ramp_idx = np.array([cs.index_of(ord(ch)) for ch in ramp], dtype=np.int64)
    scaled = rescale(img, scale, aspect=aspect)
    darkness = 1.0 - scaled.pixels.astype(np.float64) / 255.0
    tiles = tile(darkness, n)
    mean = tiles.mean(axis=(2, 3))
    level = np.minimum((mean * len(ramp)).astype(np.int64), len(ramp) - 1)
    rows, cols = mean.shape
    return AsciiGrid(rows=rows, cols=cols, cells=ramp_idx[level].ravel(), charset=cs)
