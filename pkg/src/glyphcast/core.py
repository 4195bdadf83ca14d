"""Domain types shared by every glyphcast module.

Only construction and invariant checks live here: no file I/O and no
algorithms. All types are treated as immutable once built (numpy buffers
are stored read-only), so they can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np

# ============================================================
# Errors
# ============================================================


class GlyphcastError(Exception):
    """Base error; ``error_type`` is a stable slug for logs and exit codes."""

    error_type = "glyphcast"

    def __init__(self, message: str, *, error_type: Optional[str] = None) -> None:
        super().__init__(message)
        if error_type:
            self.error_type = error_type


class DataError(GlyphcastError, ValueError):
    """Invalid image, dataset, grid or argument value."""

    error_type = "data"


class FormatError(DataError):
    """Corrupt or unsupported GCDS/GCMA file."""

    error_type = "format"


class ModelError(GlyphcastError, ValueError):
    """Classifier kind, hyperparameter or artifact problem."""

    error_type = "model"


class UsageError(GlyphcastError):
    """Bad command-line usage detected after argument parsing."""

    error_type = "usage"


class StageError(GlyphcastError):
    """A benchmark stage failed; ``stage`` names which one."""

    error_type = "stage"

    def __init__(self, stage: str, message: str, *, technique: Optional[str] = None) -> None:
        prefix = f"[{stage}]" if technique is None else f"[{stage}:{technique}]"
        super().__init__(f"{prefix} {message}", error_type=f"stage_{stage}")
        self.stage = stage
        self.technique = technique


# Long-running operations accept the orchestrator's emit adapter:
# emit(*, event_type, phase=None, data=None, ...)
EmitFn = Callable[..., None]


def noop_emit(**_: Any) -> None:
    return None


# ============================================================
# Tags
# ============================================================


class FeatureMode(str, Enum):
    RAW = "raw"
    HOG = "hog"
    LOGPOLAR = "logpolar"

    @property
    def code(self) -> int:
        return _FEATURE_CODES[self]

    @staticmethod
    def from_code(code: int) -> "FeatureMode":
        for mode, c in _FEATURE_CODES.items():
            if c == code:
                return mode
        raise FormatError(f"unknown feature mode code {code}")

    @staticmethod
    def parse(value: Any) -> "FeatureMode":
        if isinstance(value, FeatureMode):
            return value
        try:
            return FeatureMode(str(value).strip().lower())
        except ValueError as exc:
            raise DataError(
                f"unknown feature mode {value!r} (expected raw, hog or logpolar)"
            ) from exc


_FEATURE_CODES = {FeatureMode.RAW: 0, FeatureMode.HOG: 1, FeatureMode.LOGPOLAR: 2}


class ModelKind(str, Enum):
    KNN = "knn"
    SVM = "svm"
    RF = "rf"
    MLP = "mlp"
    CNN = "cnn"
    AISS = "aiss"

    @property
    def code(self) -> int:
        return list(ModelKind).index(self)

    @staticmethod
    def from_code(code: int) -> "ModelKind":
        kinds = list(ModelKind)
        if not 0 <= code < len(kinds):
            raise FormatError(f"unknown model kind code {code}")
        return kinds[code]

    @staticmethod
    def parse(value: Any) -> "ModelKind":
        if isinstance(value, ModelKind):
            return value
        try:
            return ModelKind(str(value).strip().lower())
        except ValueError as exc:
            names = ", ".join(k.value for k in ModelKind)
            raise ModelError(f"unknown model kind {value!r} (expected one of {names})") from exc


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


# ============================================================
# Images and tiles
# ============================================================


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit luminance image, stored as a (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise DataError(f"GrayImage expects a 2-D array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError("empty image")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.floating) and not np.all(np.isfinite(arr)):
                raise DataError("intensities must be finite")
            if arr.min() < 0 or arr.max() > 255:
                raise DataError("intensities must lie in [0, 255]")
            arr = np.rint(arr).astype(np.uint8)
        object.__setattr__(self, "pixels", _frozen(arr))

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @staticmethod
    def blank(width: int, height: int, value: int = 255) -> "GrayImage":
        return GrayImage(np.full((height, width), value, dtype=np.uint8))

    def equals(self, other: "GrayImage") -> bool:
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class Tile:
    """n x n block of normalized intensities; stroke = 1.0, background = 0.0."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DataError(f"Tile expects a square 2-D array, got shape {arr.shape}")
        if arr.size == 0:
            raise DataError("empty tile")
        if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
            raise DataError("tile values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(arr))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @staticmethod
    def blank(n: int = 10) -> "Tile":
        return Tile(np.zeros((n, n), dtype=np.float64))

    def equals(self, other: "Tile") -> bool:
        return bool(np.array_equal(self.values, other.values))


# ============================================================
# Charset and grids
# ============================================================

SPACE = 32
PRINTABLE_FIRST = 32
PRINTABLE_LAST = 126


@dataclass(frozen=True)
class Charset:
    """Ordered character codes; class index = position in ``codes``."""

    codes: Tuple[int, ...]
    _index: Dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        codes = tuple(int(c) for c in self.codes)
        if not codes:
            raise DataError("charset must not be empty")
        for a, b in zip(codes, codes[1:]):
            if b <= a:
                raise DataError("charset codes must be strictly increasing")
        if any(c < 0 or c > 127 for c in codes):
            raise DataError("charset codes must be 7-bit ASCII")
        if SPACE not in codes:
            raise DataError("charset must contain space (code 32)")
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(codes)})

    @staticmethod
    def default() -> "Charset":
        return _DEFAULT_CHARSET

    @staticmethod
    def from_codes(codes: Sequence[int]) -> "Charset":
        return Charset(tuple(codes))

    @property
    def size(self) -> int:
        return len(self.codes)

    @property
    def entries(self) -> List[Tuple[int, int]]:
        return [(c, i) for i, c in enumerate(self.codes)]

    @property
    def space_index(self) -> int:
        return self._index[SPACE]

    def __contains__(self, code: object) -> bool:
        return code in self._index

    def index_of(self, code: int) -> int:
        try:
            return self._index[int(code)]
        except KeyError:
            raise DataError(
                f"unknown character: code {code}", error_type="unknown_character"
            ) from None

    def code_of(self, index: int) -> int:
        if not 0 <= index < len(self.codes):
            raise DataError(f"class index {index} out of range for {self.size} classes")
        return self.codes[index]

    def char_of(self, index: int) -> str:
        return chr(self.code_of(index))


_DEFAULT_CHARSET = Charset(tuple(range(PRINTABLE_FIRST, PRINTABLE_LAST + 1)))


@dataclass(frozen=True, eq=False)
class AsciiGrid:
    """Row-major class indices into ``charset``. Checked by ``validate``."""

    rows: int
    cols: int
    cells: np.ndarray
    charset: Charset = field(default_factory=Charset.default)

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", _frozen(np.asarray(self.cells, dtype=np.int64).ravel()))

    @staticmethod
    def from_lines(lines: Sequence[str], charset: Optional[Charset] = None) -> "AsciiGrid":
        cs = charset or Charset.default()
        if not lines:
            raise DataError("grid needs at least one line")
        cols = len(lines[0])
        if any(len(line) != cols for line in lines):
            raise DataError("grid lines must have equal length")
        cells = [cs.index_of(ord(ch)) for line in lines for ch in line]
        return AsciiGrid(rows=len(lines), cols=cols, cells=np.array(cells), charset=cs)

    def as_matrix(self) -> np.ndarray:
        return self.cells.reshape(self.rows, self.cols)

    def equals(self, other: "AsciiGrid") -> bool:
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.charset == other.charset
            and bool(np.array_equal(self.cells, other.cells))
        )


def validate(grid: AsciiGrid) -> Optional[str]:
    """Return the first invariant violation of ``grid``, or None when it is ok."""

    if grid.rows < 1 or grid.cols < 1:
        return f"shape: rows and cols must be >= 1 (got {grid.rows}x{grid.cols})"
    expected = grid.rows * grid.cols
    if grid.cells.size != expected:
        return f"cell count: expected {expected}, got {grid.cells.size}"
    bad = np.flatnonzero((grid.cells < 0) | (grid.cells >= grid.charset.size))
    if bad.size:
        value = int(grid.cells[bad[0]])
        return f"class index: {value} at cell {int(bad[0])} outside [0, {grid.charset.size})"
    return None


# ============================================================
# Samples and datasets
# ============================================================


@dataclass(frozen=True, eq=False)
class Sample:
    features: np.ndarray
    label: int
    feature_mode: FeatureMode


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled feature matrix. Features are float32 (the on-disk precision)."""

    features: np.ndarray
    labels: np.ndarray
    tile_size: int
    feature_mode: FeatureMode
    charset: Charset = field(default_factory=Charset.default)
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if feats.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got shape {feats.shape}")
        if feats.shape[0] != labels.size:
            raise DataError(
                f"feature rows ({feats.shape[0]}) and labels ({labels.size}) disagree"
            )
        if labels.size and (labels.min() < 0 or labels.max() >= self.charset.size):
            raise DataError("every label must be a class index of the charset")
        mode = FeatureMode.parse(self.feature_mode)
        if self.tile_size < 2:
            raise DataError("tile size must be >= 2")
        from glyphcast.features import feature_dim  # local: features imports core

        expected = feature_dim(mode, self.tile_size)
        if labels.size and feats.shape[1] != expected:
            raise DataError(
                f"{mode.value} features for n={self.tile_size} have length {expected}, "
                f"got {feats.shape[1]}"
            )
        object.__setattr__(self, "features", _frozen(feats))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "feature_mode", mode)

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def samples(self) -> Iterator[Sample]:
        for row, label in zip(self.features, self.labels):
            yield Sample(features=row, label=int(label), feature_mode=self.feature_mode)

    def subset(self, indices: np.ndarray) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            tile_size=self.tile_size,
            feature_mode=self.feature_mode,
            charset=self.charset,
            seed=self.seed,
        )

    def equals(self, other: "Dataset") -> bool:
        return (
            self.tile_size == other.tile_size
            and self.feature_mode is other.feature_mode
            and self.charset == other.charset
            and self.features.shape == other.features.shape
            and bool(np.array_equal(self.features, other.features))
            and bool(np.array_equal(self.labels, other.labels))
        )


# ============================================================
# Model artifact
# ============================================================

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ModelArtifact:
    """Trained classifier; ``payload`` holds the kind-specific parameters."""

    kind: ModelKind
    tile_size: int
    feature_mode: FeatureMode
    charset: Charset
    hyperparams: Mapping[str, Any]
    payload: bytes
    seed: int = 0
    metadata: Mapping[str, Any] = field(default_factory=dict)
    format_version: int = MODEL_FORMAT_VERSION
    _decoded: Dict[str, Any] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        object.__setattr__(self, "feature_mode", FeatureMode.parse(self.feature_mode))
        object.__setattr__(self, "hyperparams", dict(self.hyperparams))
        object.__setattr__(self, "metadata", dict(self.metadata))
        object.__setattr__(self, "payload", bytes(self.payload))
