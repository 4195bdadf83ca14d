"""Reference glyph tiles, augmentation, dataset synthesis and GCDS files."""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy import ndimage

from glyphcast.core import (
    Charset,
    DataError,
    Dataset,
    EmitFn,
    FeatureMode,
    FormatError,
    Tile,
    noop_emit,
)
from glyphcast.features import HogConfig, extract_batch
from glyphcast.font import GLYPH_HEIGHT, GLYPH_WIDTH, glyph_bitmap
from glyphcast.preprocess import DEFAULT_THRESHOLD

DEFAULT_TILE_SIZE = 10
DEFAULT_CLASSICAL_COUNT = 2500
DEFAULT_DEEP_COUNT = 50_000
DEFAULT_TEST_FRACTION = 0.2

DATASET_MAGIC = b"GCDS"
DATASET_VERSION = 1


# ============================================================
# Glyph rendering
# ============================================================


def _area_matrix(src: int, dst: int) -> np.ndarray:
    """(dst, src) weights averaging source cells over each destination cell."""

    step = src / dst
    lo = np.arange(dst, dtype=np.float64)[:, None] * step
    hi = lo + step
    cells = np.arange(src, dtype=np.float64)[None, :]
    overlap = np.clip(np.minimum(hi, cells + 1.0) - np.maximum(lo, cells), 0.0, None)
    return overlap / step


@lru_cache(maxsize=4096)
def _render(code: int, n: int) -> np.ndarray:
    bitmap = glyph_bitmap(code).astype(np.float64)
    ry = _area_matrix(GLYPH_HEIGHT, n)
    rx = _area_matrix(GLYPH_WIDTH, n)
    values = np.clip(ry @ bitmap @ rx.T, 0.0, 1.0)
    values.setflags(write=False)
    return values


def render_glyph(code: int, n: int = DEFAULT_TILE_SIZE, charset: Optional[Charset] = None) -> Tile:
    """Rasterize ``code`` from the embedded font into an n x n tile."""

    if n < 2:
        raise DataError(f"tile size must be >= 2, got {n}")
    if charset is not None and code not in charset:
        raise DataError(f"unknown character: code {code}", error_type="unknown_character")
    return Tile(_render(int(code), int(n)))


def glyph_stack(charset: Charset, n: int = DEFAULT_TILE_SIZE) -> np.ndarray:
    """Clean tiles of every charset entry, stacked in class order."""

    return np.stack([_render(code, n) for code in charset.codes])


def glyph_to_pixels(values: np.ndarray) -> np.ndarray:
    """Tile values to 8-bit luminance: stroke 1.0 is black, background white."""

    return np.rint(255.0 - 255.0 * np.asarray(values, dtype=np.float64)).astype(np.uint8)


def quantize(values: np.ndarray, threshold: int = DEFAULT_THRESHOLD) -> np.ndarray:
    """Stroke mask of ``values`` as the conversion pipeline sees it (1.0 = stroke)."""

    return (glyph_to_pixels(values) < threshold).astype(np.float64)


# ============================================================
# Augmentation
# ============================================================


@dataclass(frozen=True)
class AugmentParams:
    """Augmentation magnitudes.

    Shift and blur are measured on the glyph canvas, which is ``supersample``
    times finer than the tile: the defaults move a glyph by at most 4/7 of a
    tile pixel in steps of 1/7. Noise amplitude is in tile values.
    """

    max_shift: int = 4
    max_sigma: float = 1.0
    max_noise: float = 0.1
    supersample: int = 7

    def __post_init__(self) -> None:
        if self.max_shift < 0 or self.max_sigma < 0 or self.max_noise < 0:
            raise DataError("augmentation magnitudes must be non-negative")
        if self.supersample < 1:
            raise DataError(f"supersample must be >= 1, got {self.supersample}")

    @staticmethod
    def identity() -> "AugmentParams":
        return AugmentParams(max_shift=0, max_sigma=0.0, max_noise=0.0)

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "AugmentParams":
        try:
            return AugmentParams(
                max_shift=int(d.get("max_shift", 4)),
                max_sigma=float(d.get("max_sigma", 1.0)),
                max_noise=float(d.get("max_noise", 0.1)),
                supersample=int(d.get("supersample", 7)),
            )
        except (TypeError, ValueError) as exc:
            raise DataError(f"malformed augmentation settings: {exc}", error_type="config") from exc


def augment_values(
    values: np.ndarray,
    rng: np.random.Generator,
    params: AugmentParams,
    threshold: Optional[int] = None,
) -> np.ndarray:
    """Shift, blur, optionally quantize, then add noise.

    With ``threshold`` set the shifted and blurred glyph is reduced to its
    stroke mask before the noise is added.
    """

    # draw order is fixed (dx, dy, sigma, amplitude, noise field) whatever the params
    s = int(params.max_shift)
    dx = int(rng.integers(-s, s + 1))
    dy = int(rng.integers(-s, s + 1))
    sigma = float(rng.uniform(0.0, params.max_sigma))
    amplitude = float(rng.uniform(0.0, params.max_noise))
    noise = rng.uniform(-1.0, 1.0, size=values.shape)

    scale = float(params.supersample)
    out = np.asarray(values, dtype=np.float64)
    if dx or dy:
        out = ndimage.shift(
            out, (dy / scale, dx / scale), order=1, mode="grid-constant", cval=0.0, prefilter=False
        )
    if sigma > 0.0:
        out = ndimage.gaussian_filter(out, sigma=sigma / scale, mode="constant", cval=0.0)
    if threshold is not None:
        out = quantize(out, threshold)
    if amplitude > 0.0:
        out = out + amplitude * noise
    return np.clip(out, 0.0, 1.0)


def augment(t: Tile, rng: np.random.Generator, params: AugmentParams) -> Tile:
    """Shift, blur and add noise to ``t``, in that order."""

    return Tile(augment_values(t.values, rng, params))


# ============================================================
# Synthesis
# ============================================================


def per_class_counts(count: int, classes: int) -> np.ndarray:
    """Even split; the remainder goes to the lowest class indices."""

    base, extra = divmod(count, classes)
    counts = np.full(classes, base, dtype=np.int64)
    counts[:extra] += 1
    return counts


def sample_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def _synth_tiles(
    labels: np.ndarray,
    clean: np.ndarray,
    glyphs: np.ndarray,
    indices: range,
    seed: int,
    params: AugmentParams,
    threshold: Optional[int],
) -> np.ndarray:
    out = np.empty((len(indices),) + glyphs.shape[1:], dtype=np.float64)
    for k, i in enumerate(indices):
        base = glyphs[labels[i]]
        if clean[i]:
            out[k] = base if threshold is None else quantize(base, threshold)
        else:
            out[k] = augment_values(base, sample_rng(seed, i), params, threshold)
    return out


def synthesize(
    charset: Optional[Charset] = None,
    n: int = DEFAULT_TILE_SIZE,
    count: int = DEFAULT_CLASSICAL_COUNT,
    seed: int = 0,
    feature_mode: FeatureMode = FeatureMode.RAW,
    params: Optional[AugmentParams] = None,
    *,
    hog_cfg: Optional[HogConfig] = None,
    threshold: Optional[int] = DEFAULT_THRESHOLD,
    threads: Optional[int] = None,
    emit: Optional[EmitFn] = None,
) -> Dataset:
    """Build a class-balanced, augmented dataset of glyph tiles.

    Samples are grouped by class; the first sample of every class is the
    clean glyph. Tiles are reduced to the stroke mask the conversion
    pipeline produces under ``threshold`` before noise is added; ``None``
    keeps the grey area-averaged values. Sample ``i`` draws from its own
    ``(seed, i)`` stream, so the result does not depend on ``threads``.
    """

    emit = emit or noop_emit
    charset = charset or Charset.default()
    params = params or AugmentParams()
    mode = FeatureMode.parse(feature_mode)
    if n < 2:
        raise DataError(f"tile size must be >= 2, got {n}")
    if count < charset.size:
        raise DataError(
            f"too few samples: {count} < {charset.size} classes", error_type="too_few_samples"
        )

    counts = per_class_counts(count, charset.size)
    labels = np.repeat(np.arange(charset.size, dtype=np.int64), counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    clean = np.zeros(count, dtype=bool)
    clean[starts] = True
    glyphs = glyph_stack(charset, n)

    emit(
        event_type="stage",
        phase="synthesize",
        data={"stage": "synthesize", "count": count, "tile_size": n, "feature_mode": mode.value},
    )
    workers = max(1, int(threads or 1))
    if workers == 1 or count < 2 * workers:
        tiles = _synth_tiles(labels, clean, glyphs, range(count), seed, params, threshold)
    else:
        bounds = np.linspace(0, count, workers + 1).astype(int)
        chunks = [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    lambda r: _synth_tiles(labels, clean, glyphs, r, seed, params, threshold),
                    chunks,
                )
            )
        tiles = np.concatenate(parts)

    features = extract_batch(tiles, mode, hog_cfg=hog_cfg)
    return Dataset(
        features=features.astype(np.float32),
        labels=labels,
        tile_size=n,
        feature_mode=mode,
        charset=charset,
        seed=seed,
    )


def class_counts(ds: Dataset) -> np.ndarray:
    return np.bincount(ds.labels, minlength=ds.charset.size)


def split(
    ds: Dataset, test_fraction: float = DEFAULT_TEST_FRACTION, seed: int = 0
) -> Tuple[Dataset, Dataset]:
    """Stratified train/test split.

    The test size is ``round(N * fraction)``; per-class quotas are floored
    and the leftover slots go to the classes with the largest remainders.
    """

    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test fraction must lie in (0, 1), got {test_fraction}")
    total = len(ds)
    counts = class_counts(ds)
    quota = counts * test_fraction
    take = np.floor(quota).astype(np.int64)
    target = int(np.floor(total * test_fraction + 0.5))
    leftover = target - int(take.sum())
    if leftover > 0:
        remainder = quota - take
        order = np.lexsort((np.arange(counts.size), -remainder))
        order = [c for c in order if take[c] < counts[c]]
        for c in order[:leftover]:
            take[c] += 1
    if take.sum() == 0 or take.sum() == total:
        raise DataError(
            f"test fraction {test_fraction} leaves an empty split for {total} samples",
            error_type="empty_split",
        )

    test_idx: List[np.ndarray] = []
    for c in np.flatnonzero(counts):
        members = np.flatnonzero(ds.labels == c)
        shuffled = np.random.default_rng([int(seed), int(c)]).permutation(members)
        test_idx.append(shuffled[: take[c]])
    test_mask = np.zeros(total, dtype=bool)
    if test_idx:
        test_mask[np.concatenate(test_idx)] = True
    return ds.subset(np.flatnonzero(~test_mask)), ds.subset(np.flatnonzero(test_mask))


# ============================================================
# GCDS files
# ============================================================

_HEADER = struct.Struct("<4sIIB")


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype([("label", "<u4"), ("length", "<u4"), ("features", "<f4", (dim,))])


def write_dataset(ds: Dataset, path: Union[str, Path]) -> Path:
    """Write ``ds`` as little-endian GCDS; the synthesis seed is not stored."""

    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    records = np.empty(len(ds), dtype=_record_dtype(ds.dim))
    records["label"] = ds.labels
    records["length"] = ds.dim
    records["features"] = ds.features
    with p.open("wb") as fh:
        fh.write(_HEADER.pack(DATASET_MAGIC, DATASET_VERSION, ds.tile_size, ds.feature_mode.code))
        fh.write(struct.pack("<I", ds.charset.size))
        fh.write(bytes(ds.charset.codes))
        fh.write(struct.pack("<Q", len(ds)))
        fh.write(records.tobytes())
    return p


def read_dataset(path: Union[str, Path]) -> Dataset:
    blob = Path(path).read_bytes()
    try:
        magic, version, tile_size, mode_code = _HEADER.unpack_from(blob, 0)
        offset = _HEADER.size
        if magic != DATASET_MAGIC:
            raise FormatError(f"{path}: not a GCDS file (magic {magic!r})")
        if version != DATASET_VERSION:
            raise FormatError(f"{path}: unsupported GCDS version {version}")
        (ncodes,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        codes = tuple(blob[offset : offset + ncodes])
        if len(codes) != ncodes:
            raise FormatError(f"{path}: truncated charset")
        offset += ncodes
        (count,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
        dim = 0
        if count:
            (dim,) = struct.unpack_from("<I", blob, offset + 4)
    except struct.error as exc:
        raise FormatError(f"{path}: truncated header") from exc

    dtype = _record_dtype(dim)
    expected = offset + count * dtype.itemsize
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    records = np.frombuffer(blob, dtype=dtype, count=count, offset=offset)
    if count and np.any(records["length"] != dim):
        raise FormatError(f"{path}: samples disagree on feature length")
    return Dataset(
        features=records["features"].reshape(count, dim),
        labels=records["label"].astype(np.int64),
        tile_size=tile_size,
        feature_mode=FeatureMode.from_code(mode_code),
        charset=Charset(codes),
        seed=None,
    )


def export_csv(ds: Dataset, path: Union[str, Path]) -> Path:
    """Write ``label,f0,f1,...`` rows for cross-checking in other tools."""

    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    header = ",".join(["label"] + [f"f{i}" for i in range(ds.dim)])
    table = np.column_stack([ds.labels.astype(np.float64), ds.features.astype(np.float64)])
    np.savetxt(p, table, fmt=["%d"] + ["%.9g"] * ds.dim, delimiter=",", header=header, comments="")
    return p


def summarize_counts(ds: Dataset) -> Dict[str, int]:
    """``{char: count}`` for display; keys are the characters themselves."""

    counts = class_counts(ds)
    return {ds.charset.char_of(i): int(c) for i, c in enumerate(counts)}
