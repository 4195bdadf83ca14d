"""Metrics and the benchmark runner that builds the technique comparison table."""

from __future__ import annotations

import csv
import io
import json
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.ndimage import correlate1d

from glyphcast import __version__
from glyphcast.classify import default_hyperparams, expected_dim, predict, predict_batch, train
from glyphcast.convert import convert_image, grid_to_image, render_like, tone_convert
from glyphcast.core import (
    AsciiGrid,
    Charset,
    DataError,
    Dataset,
    EmitFn,
    FeatureMode,
    GlyphcastError,
    GrayImage,
    ModelArtifact,
    ModelKind,
    StageError,
    noop_emit,
)
from glyphcast.fixtures import DEFAULT_FIXTURE_SIZE, draw_fixture, fixture_names
from glyphcast.glyphset import (
    DEFAULT_CLASSICAL_COUNT,
    DEFAULT_DEEP_COUNT,
    DEFAULT_TEST_FRACTION,
    DEFAULT_TILE_SIZE,
    AugmentParams,
    split,
    synthesize,
)
from glyphcast.preprocess import load_image, rescale

# ============================================================
# SSIM
# ============================================================


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 255.0

    def __post_init__(self) -> None:
        if self.window < 3 or self.window % 2 == 0:
            raise DataError(f"ssim window must be odd and >= 3, got {self.window}")
        if self.sigma <= 0 or self.k1 <= 0 or self.k2 <= 0 or self.data_range <= 0:
            raise DataError("ssim sigma, k1, k2 and data_range must be positive")

    def weights(self) -> np.ndarray:
        r = self.window // 2
        x = np.arange(-r, r + 1, dtype=np.float64)
        w = np.exp(-0.5 * (x / self.sigma) ** 2)
        return w / w.sum()


def _smooth(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    out = correlate1d(a, w, axis=0, mode="reflect")
    return correlate1d(out, w, axis=1, mode="reflect")


def ssim_map(a: GrayImage, b: GrayImage, cfg: Optional[SsimConfig] = None) -> np.ndarray:
    """Per-position SSIM over every window that lies fully inside the image."""

    cfg = cfg or SsimConfig()
    if a.pixels.shape != b.pixels.shape:
        raise DataError(
            f"ssim dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}",
            error_type="dimension_mismatch",
        )
    if min(a.pixels.shape) < cfg.window:
        raise DataError(
            f"image {a.width}x{a.height} is smaller than the {cfg.window}px ssim window"
        )
    x = a.pixels.astype(np.float64)
    y = b.pixels.astype(np.float64)
    w = cfg.weights()
    ux, uy = _smooth(x, w), _smooth(y, w)
    vx = _smooth(x * x, w) - ux * ux
    vy = _smooth(y * y, w) - uy * uy
    vxy = _smooth(x * y, w) - ux * uy
    c1 = (cfg.k1 * cfg.data_range) ** 2
    c2 = (cfg.k2 * cfg.data_range) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    pad = cfg.window // 2
    return s[pad : s.shape[0] - pad, pad : s.shape[1] - pad]


def ssim(a: GrayImage, b: GrayImage, cfg: Optional[SsimConfig] = None) -> float:
    return float(ssim_map(a, b, cfg).mean())


# ============================================================
# Classification metrics
# ============================================================


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    macro_f1: float
    macro_recall: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def classification_metrics(
    pred: Union[np.ndarray, Sequence[int]], truth: Union[np.ndarray, Sequence[int]], classes: int
) -> ClassificationMetrics:
    """Accuracy plus macro F1 / recall over the classes present in ``truth``.

    Precision is 0 for a class that is never predicted.
    """

    p = np.asarray(pred, dtype=np.int64).ravel()
    t = np.asarray(truth, dtype=np.int64).ravel()
    if p.shape != t.shape:
        raise DataError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    if t.size == 0:
        raise DataError("no labels to score")
    for name, arr in (("prediction", p), ("label", t)):
        if arr.min() < 0 or arr.max() >= classes:
            raise DataError(f"{name} outside [0, {classes})")

    tp = np.bincount(t[p == t], minlength=classes).astype(np.float64)
    support = np.bincount(t, minlength=classes).astype(np.float64)
    predicted = np.bincount(p, minlength=classes).astype(np.float64)
    present = support > 0

    recall = np.divide(tp, support, out=np.zeros(classes), where=present)
    precision = np.divide(tp, predicted, out=np.zeros(classes), where=predicted > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(classes), where=denom > 0)
    return ClassificationMetrics(
        accuracy=float(np.mean(p == t)),
        macro_f1=float(f1[present].mean()),
        macro_recall=float(recall[present].mean()),
    )


# ============================================================
# Timing and round trip
# ============================================================


def _median_ms(fn: Callable[[], Any], repetitions: int) -> float:
    if repetitions < 1:
        raise DataError(f"repetitions must be >= 1, got {repetitions}")
    fn()  # warm-up
    samples = []
    for _ in range(repetitions):
        started = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - started) * 1000.0)
    return max(float(np.median(samples)), 1e-6)


def time_conversion(
    img: GrayImage,
    m: ModelArtifact,
    repetitions: int = 5,
    *,
    scale: float = 1.0,
    aspect: bool = True,
    invert: Optional[bool] = None,
) -> float:
    """Median milliseconds of ``convert_image`` after one untimed warm-up run."""

    return _median_ms(
        lambda: convert_image(img, m, scale, invert=invert, aspect=aspect), repetitions
    )


def glyph_sheet(charset: Charset) -> AsciiGrid:
    """Every charset entry once, in a single row."""

    return AsciiGrid(
        rows=1, cols=charset.size, cells=np.arange(charset.size, dtype=np.int64), charset=charset
    )


def round_trip_rate(m: ModelArtifact) -> float:
    """Share of charset glyphs the full pipeline (aspect off) gives back unchanged."""

    sheet = glyph_sheet(m.charset)
    img = grid_to_image(sheet, m.tile_size)
    out = convert_image(img, m, 1.0, invert=False, aspect=False)
    return float(np.mean(out.cells == sheet.cells))


# ============================================================
# Benchmark config
# ============================================================

DEFAULT_KINDS = tuple(k.value for k in ModelKind)
DEFAULT_HOG_KINDS = ("knn", "svm", "rf")

TEST_ACCURACY_FLOORS: Dict[str, float] = {
    "knn": 0.90,
    "svm": 0.88,
    "rf": 0.86,
    "mlp": 0.85,
    "cnn": 0.90,
}
ROUND_TRIP_FLOORS: Dict[str, float] = {"knn": 1.0, "aiss": 1.0, "rf": 0.95, "cnn": 0.95}
# published macro (F1, recall) on the synthetic test set
REFERENCE_MACRO: Dict[str, Tuple[float, float]] = {
    "knn": (0.95, 0.96),
    "svm": (0.93, 0.94),
    "rf": (0.91, 0.91),
}
REFERENCE_MACRO_TOLERANCE = 0.07
SSIM_MARGIN = 0.05
# held-out augmented accuracy may differ from test accuracy by this much
ROBUSTNESS_TOLERANCE = 0.02
# held-out sets draw from seed + offset, disjoint from the training streams
HELDOUT_SEED_OFFSET = 1000

_CONFIG_KEYS = {
    "seed",
    "tile_size",
    "classical_count",
    "deep_count",
    "test_fraction",
    "kinds",
    "hog_kinds",
    "repetitions",
    "scale",
    "fixtures",
    "fixture_size",
    "corpus",
    "heldout_count",
    "augment",
    "hyperparams",
    "floors",
}


def _str_list(value: Any, key: str) -> Tuple[str, ...]:
    if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
        raise DataError(f"bench config {key!r} must be a list of strings", error_type="config")
    return tuple(value)


@dataclass(frozen=True)
class BenchConfig:
    seed: int = 0
    tile_size: int = DEFAULT_TILE_SIZE
    classical_count: int = DEFAULT_CLASSICAL_COUNT
    deep_count: int = DEFAULT_DEEP_COUNT
    test_fraction: float = DEFAULT_TEST_FRACTION
    kinds: Tuple[str, ...] = DEFAULT_KINDS
    hog_kinds: Tuple[str, ...] = DEFAULT_HOG_KINDS
    repetitions: int = 3
    scale: float = 1.0
    fixtures: Tuple[str, ...] = tuple(fixture_names())
    fixture_size: int = DEFAULT_FIXTURE_SIZE
    corpus: Tuple[str, ...] = ()
    heldout_count: int = DEFAULT_CLASSICAL_COUNT
    augment: AugmentParams = field(default_factory=AugmentParams)
    hyperparams: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    floors: Mapping[str, float] = field(default_factory=lambda: dict(TEST_ACCURACY_FLOORS))

    def __post_init__(self) -> None:
        if self.seed < 0:
            raise DataError(f"seed must be non-negative, got {self.seed}", error_type="config")
        if self.repetitions < 1:
            raise DataError("repetitions must be >= 1", error_type="config")
        if self.heldout_count and self.heldout_count < 2 * Charset.default().size:
            raise DataError(
                "heldout_count must be 0 (off) or give every class two samples",
                error_type="config",
            )
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError("test_fraction must lie in (0, 1)", error_type="config")
        for name in self.kinds:
            ModelKind.parse(name)
        for name in self.hog_kinds:
            kind = ModelKind.parse(name)
            if kind in (ModelKind.CNN, ModelKind.AISS):
                raise DataError(f"{name} cannot run on hog features", error_type="config")
        if not self.kinds and not self.hog_kinds:
            raise DataError("bench config names no techniques", error_type="config")

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "BenchConfig":
        unknown = sorted(set(d) - _CONFIG_KEYS)
        if unknown:
            raise DataError(
                f"unknown bench config key(s): {', '.join(unknown)}", error_type="config"
            )
        kwargs: Dict[str, Any] = {}
        try:
            for key in ("seed", "tile_size", "classical_count", "deep_count", "repetitions",
                        "fixture_size", "heldout_count"):
                if key in d:
                    kwargs[key] = int(d[key])
            for key in ("test_fraction", "scale"):
                if key in d:
                    kwargs[key] = float(d[key])
        except (TypeError, ValueError) as exc:
            raise DataError(f"malformed bench config: {exc}", error_type="config") from exc
        for key in ("kinds", "hog_kinds", "fixtures", "corpus"):
            if key in d:
                kwargs[key] = _str_list(d[key], key)
        if "augment" in d:
            kwargs["augment"] = AugmentParams.from_dict(d["augment"])
        if "hyperparams" in d:
            kwargs["hyperparams"] = {str(k): dict(v) for k, v in d["hyperparams"].items()}
        if "floors" in d:
            floors = dict(TEST_ACCURACY_FLOORS)
            floors.update({str(k): float(v) for k, v in d["floors"].items()})
            kwargs["floors"] = floors
        return BenchConfig(**kwargs)

    @staticmethod
    def from_toml(path: Union[str, Path]) -> "BenchConfig":
        p = Path(path)
        try:
            with p.open("rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"malformed config {p}: {exc}", error_type="config") from exc
        cfg = BenchConfig.from_dict(data)
        # relative corpus paths resolve against the config file
        corpus = tuple(str((p.parent / c).resolve()) if not Path(c).is_absolute() else c
                       for c in cfg.corpus)
        return replace(cfg, corpus=corpus)

    def techniques(self) -> List[Tuple[str, ModelKind, FeatureMode]]:
        out: List[Tuple[str, ModelKind, FeatureMode]] = []
        kinds = [ModelKind.parse(k) for k in self.kinds]
        for kind in kinds:
            mode = FeatureMode.LOGPOLAR if kind is ModelKind.AISS else FeatureMode.RAW
            out.append((kind.value, kind, mode))
            if kind.value in self.hog_kinds:
                out.append((f"{kind.value}+hog", kind, FeatureMode.HOG))
        for name in self.hog_kinds:
            if ModelKind.parse(name) not in kinds:
                out.append((f"{name}+hog", ModelKind.parse(name), FeatureMode.HOG))
        return out

    def sample_count(self, kind: ModelKind) -> int:
        return self.deep_count if kind in (ModelKind.MLP, ModelKind.CNN) else self.classical_count


# ============================================================
# Benchmark report
# ============================================================


@dataclass
class BenchRow:
    name: str
    kind: Optional[str] = None
    features: Optional[str] = None
    train_acc: Optional[float] = None
    test_acc: Optional[float] = None
    heldout_acc: Optional[float] = None
    macro_f1: Optional[float] = None
    macro_recall: Optional[float] = None
    round_trip: Optional[float] = None
    blank_char: Optional[str] = None
    ssim: Optional[float] = None
    conversion_time_ms: Optional[float] = None
    fixture_ssim: Dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class AcceptanceCheck:
    name: str
    passed: bool
    detail: str
    timing: bool = False


TIMING_FIELDS = ("conversion_time_ms",)
COLUMNS = (
    "name",
    "features",
    "train_acc",
    "test_acc",
    "heldout_acc",
    "macro_f1",
    "macro_recall",
    "round_trip",
    "blank_char",
    "ssim",
    "conversion_time_ms",
)
_FORMATS = {"ssim": "{:.4f}", "conversion_time_ms": "{:.2f}"}


@dataclass
class BenchReport:
    rows: List[BenchRow]
    references: List[BenchRow] = field(default_factory=list)
    environment: Dict[str, Any] = field(default_factory=dict)
    random_ssim: Dict[str, float] = field(default_factory=dict)
    checks: List[AcceptanceCheck] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self, include_timing: bool = True) -> Dict[str, Any]:
        def row(r: BenchRow) -> Dict[str, Any]:
            d = asdict(r)
            if not include_timing:
                for key in TIMING_FIELDS:
                    d.pop(key, None)
            return d

        return {
            "environment": dict(self.environment),
            "references": [row(r) for r in self.references],
            "rows": [row(r) for r in self.rows],
            "random_ssim": dict(self.random_ssim),
            "checks": [asdict(c) for c in self.checks if include_timing or not c.timing],
        }

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(self.to_dict(include_timing), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for r in self.references + self.rows:
            writer.writerow(["" if getattr(r, c) is None else getattr(r, c) for c in COLUMNS])
        return buf.getvalue()

    def to_table(self) -> str:
        cells = [list(COLUMNS)]
        for r in self.references + self.rows:
            line = []
            for c in COLUMNS:
                v = getattr(r, c)
                if v is None:
                    line.append("-")
                elif isinstance(v, float):
                    line.append(_FORMATS.get(c, "{:.3f}").format(v))
                else:
                    line.append(repr(v) if c == "blank_char" else str(v))
            cells.append(line)
        widths = [max(len(row[i]) for row in cells) for i in range(len(COLUMNS))]
        out = []
        for i, row in enumerate(cells):
            padded = [
                v.ljust(w) if j < 2 else v.rjust(w) for j, (v, w) in enumerate(zip(row, widths))
            ]
            out.append("  ".join(padded))
            if i == 0:
                out.append("  ".join("-" * w for w in widths))
        if self.checks:
            out.append("")
            for c in self.checks:
                out.append(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
        return "\n".join(out)


# ============================================================
# Runner
# ============================================================


@contextmanager
def _stage(name: str, emit: EmitFn, technique: Optional[str] = None) -> Iterator[None]:
    phase = name if technique is None else f"{name}:{technique}"
    emit(event_type="stage", phase=phase, data={"stage": name, "technique": technique})
    try:
        yield
    except StageError:
        raise
    except (GlyphcastError, ValueError, OSError) as exc:
        raise StageError(name, str(exc), technique=technique) from exc


def _load_corpus(config: BenchConfig) -> Dict[str, GrayImage]:
    images: Dict[str, GrayImage] = {}
    for name in config.fixtures:
        images[name] = draw_fixture(name, config.fixture_size)
    for path in config.corpus:
        images[Path(path).stem] = load_image(path)
    if not images:
        raise DataError("bench corpus is empty")
    return images


def random_grid(rows: int, cols: int, charset: Charset, rng: np.random.Generator) -> AsciiGrid:
    cells = rng.integers(0, charset.size, size=rows * cols, dtype=np.int64)
    return AsciiGrid(rows=rows, cols=cols, cells=cells, charset=charset)


def _grid_shape(img: GrayImage, n: int) -> Tuple[int, int]:
    return -(-img.height // n), -(-img.width // n)


def heldout_set(
    config: BenchConfig,
    charset: Charset,
    mode: FeatureMode,
    *,
    threads: Optional[int] = None,
    emit: Optional[EmitFn] = None,
) -> Dataset:
    """Augmented samples from seeds the training data never used, clean glyphs left out."""

    ds = synthesize(
        charset, config.tile_size, config.heldout_count,
        config.seed + HELDOUT_SEED_OFFSET, mode, config.augment, threads=threads, emit=emit,
    )
    starts = np.concatenate([[0], np.cumsum(np.bincount(ds.labels, minlength=charset.size))])
    keep = np.ones(len(ds), dtype=bool)
    keep[starts[:-1]] = False
    return ds.subset(np.flatnonzero(keep))


def acceptance_checks(report: BenchReport, config: BenchConfig) -> List[AcceptanceCheck]:
    checks: List[AcceptanceCheck] = []
    for r in report.rows:
        plain = r.features != FeatureMode.HOG.value
        floor = config.floors.get(r.kind or "")
        if plain and floor is not None and r.test_acc is not None:
            checks.append(AcceptanceCheck(
                f"test_accuracy:{r.name}", r.test_acc >= floor, f"{r.test_acc:.3f} >= {floor:.2f}"
            ))
        rt_floor = ROUND_TRIP_FLOORS.get(r.kind or "")
        if plain and rt_floor is not None and r.round_trip is not None:
            checks.append(AcceptanceCheck(
                f"round_trip:{r.name}", r.round_trip >= rt_floor,
                f"{r.round_trip:.3f} >= {rt_floor:.2f}",
            ))
        ref = REFERENCE_MACRO.get(r.kind or "")
        if plain and ref is not None and r.macro_f1 is not None and r.macro_recall is not None:
            ok = (abs(r.macro_f1 - ref[0]) <= REFERENCE_MACRO_TOLERANCE
                  and abs(r.macro_recall - ref[1]) <= REFERENCE_MACRO_TOLERANCE)
            checks.append(AcceptanceCheck(
                f"macro_parity:{r.name}", ok,
                f"f1 {r.macro_f1:.3f} vs {ref[0]:.2f}, recall {r.macro_recall:.3f} vs {ref[1]:.2f}",
            ))
        if plain and r.blank_char is not None:
            checks.append(AcceptanceCheck(
                f"blank_tile:{r.name}", r.blank_char == " ", f"blank tile -> {r.blank_char!r}"
            ))
        # held-out gap is judged only where an accuracy floor applies
        if plain and floor is not None and r.heldout_acc is not None and r.test_acc is not None:
            gap = abs(r.heldout_acc - r.test_acc)
            checks.append(AcceptanceCheck(
                f"robustness:{r.name}", gap <= ROBUSTNESS_TOLERANCE,
                f"held-out {r.heldout_acc:.3f} vs test {r.test_acc:.3f}",
            ))
        if r.fixture_ssim:
            margins = {k: v - report.random_ssim[k] for k, v in r.fixture_ssim.items()}
            worst = min(margins, key=lambda k: margins[k])
            checks.append(AcceptanceCheck(
                f"ssim_over_random:{r.name}", margins[worst] >= SSIM_MARGIN,
                f"worst margin {margins[worst]:.4f} on {worst}",
            ))

    timed = {r.name: r.conversion_time_ms for r in report.rows if r.conversion_time_ms is not None}
    if "rf" in timed:
        for other in ("knn", "svm"):
            if other in timed:
                checks.append(AcceptanceCheck(
                    f"timing:rf<{other}", timed["rf"] < timed[other],
                    f"{timed['rf']:.2f}ms vs {timed[other]:.2f}ms", timing=True,
                ))
    if "svm" in timed and "knn" in timed:
        checks.append(AcceptanceCheck(
            "timing:svm_slowest", timed["svm"] > timed["knn"],
            f"{timed['svm']:.2f}ms vs knn {timed['knn']:.2f}ms", timing=True,
        ))
    return checks


def run_benchmark(
    config: BenchConfig, *, threads: Optional[int] = None, emit: Optional[EmitFn] = None
) -> BenchReport:
    """Synthesize, train, score and time every configured technique.

    Everything except the timing columns is a function of ``config``.
    """

    emit = emit or noop_emit
    charset = Charset.default()
    n = config.tile_size

    with _stage("fixtures", emit):
        images = _load_corpus(config)
        # ssim targets: the page at output resolution, aspect correction off
        targets = {name: rescale(img, config.scale, aspect=False) for name, img in images.items()}

    random_ssim: Dict[str, float] = {}
    original = BenchRow(name="original", ssim=1.0)
    tone = BenchRow(name="tone", features="tone")
    with _stage("baselines", emit):
        for i, (name, target) in enumerate(targets.items()):
            rows, cols = _grid_shape(target, n)
            rng = np.random.default_rng([config.seed, 2, i])
            random_grid_img = render_like(random_grid(rows, cols, charset, rng), target, n)
            random_ssim[name] = ssim(target, random_grid_img)
            original.fixture_ssim[name] = ssim(target, target)
            tone_grid = tone_convert(target, charset, n, aspect=False)
            tone.fixture_ssim[name] = ssim(target, render_like(tone_grid, target, n))
        original.ssim = float(np.mean(list(original.fixture_ssim.values())))
        tone.ssim = float(np.mean(list(tone.fixture_ssim.values())))
        first = next(iter(images.values()))
        tone.conversion_time_ms = _median_ms(
            lambda: tone_convert(first, charset, n, scale=config.scale, aspect=False),
            config.repetitions,
        )

    datasets: Dict[Tuple[int, FeatureMode], Tuple[Dataset, Dataset]] = {}
    heldout: Dict[FeatureMode, Dataset] = {}
    sizes: Dict[str, Dict[str, int]] = {}
    rows_out: List[BenchRow] = []
    for name, kind, mode in config.techniques():
        count = config.sample_count(kind)
        key = (count, mode)
        if key not in datasets:
            with _stage("synth", emit, name):
                ds = synthesize(
                    charset, n, count, config.seed, mode, config.augment,
                    threads=threads, emit=emit,
                )
                datasets[key] = split(ds, config.test_fraction, config.seed)
        train_set, test_set = datasets[key]
        sizes[name] = {"train": len(train_set), "test": len(test_set)}

        with _stage("train", emit, name):
            hp = default_hyperparams(kind, config.hyperparams.get(kind.value))
            model = train(kind, train_set, hp, config.seed, threads=threads, emit=emit)

        row = BenchRow(name=name, kind=kind.value, features=mode.value)
        with _stage("evaluate", emit, name):
            scores = classification_metrics(
                predict_batch(model, test_set.features), test_set.labels, charset.size
            )
            row.train_acc = float(model.metadata["train_accuracy"])
            row.test_acc = scores.accuracy
            row.macro_f1 = scores.macro_f1
            row.macro_recall = scores.macro_recall
            row.round_trip = round_trip_rate(model)
            row.blank_char = charset.char_of(predict(model, np.zeros(expected_dim(model))))
            if config.heldout_count:
                if mode not in heldout:
                    heldout[mode] = heldout_set(config, charset, mode, threads=threads, emit=emit)
                held = heldout[mode]
                hits = predict_batch(model, held.features) == held.labels
                row.heldout_acc = float(np.mean(hits))
        for metric in ("test_acc", "heldout_acc", "macro_f1", "macro_recall", "round_trip"):
            emit(event_type="metric", phase=f"evaluate:{name}",
                 data={"name": metric, "value": getattr(row, metric)})

        with _stage("convert", emit, name):
            times = []
            for fixture, img in images.items():
                target = targets[fixture]
                grid = convert_image(target, model, aspect=False)
                row.fixture_ssim[fixture] = ssim(target, render_like(grid, target, n))
                times.append(time_conversion(
                    img, model, config.repetitions, scale=config.scale, aspect=False
                ))
            row.ssim = float(np.mean(list(row.fixture_ssim.values())))
            row.conversion_time_ms = float(np.mean(times))
        emit(event_type="metric", phase=f"convert:{name}", data={"name": "ssim", "value": row.ssim})
        rows_out.append(row)

    report = BenchReport(
        rows=rows_out,
        references=[original, tone],
        environment={
            "version": __version__,
            "seed": config.seed,
            "tile_size": n,
            "test_fraction": config.test_fraction,
            "fixtures": list(images),
            "dataset_sizes": sizes,
        },
        random_ssim=random_ssim,
    )
    report.checks = acceptance_checks(report, config)
    return report


__all__ = [
    "AcceptanceCheck",
    "BenchConfig",
    "BenchReport",
    "BenchRow",
    "ClassificationMetrics",
    "SsimConfig",
    "acceptance_checks",
    "classification_metrics",
    "glyph_sheet",
    "heldout_set",
    "random_grid",
    "round_trip_rate",
    "run_benchmark",
    "ssim",
    "ssim_map",
    "time_conversion",
]
