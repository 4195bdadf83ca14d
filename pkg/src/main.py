#!/usr/bin/env python3
from __future__ import annotations

"""
Central Orchestrator (main layer)

Responsibilities:
- load configs (configs/model.json, configs/synth.json, configs/bench.toml);
- create the logging context (structured JSONL + console narrative);
- dispatch the synth / train / convert / bench subcommands to the
  glyphcast library and map failures to exit codes.

stdout only ever carries the command's payload (ASCII art, counts, the
benchmark report). Everything human-facing goes through the event bus and
ends up on stderr via ConsoleLogger.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from itertools import count
from pathlib import Path
from threading import Lock
from typing import Any, Callable, Dict, List, Mapping, Optional, TextIO

import numpy as np

from glyphcast import __version__
from glyphcast.classify import (
    default_hyperparams,
    predict_batch,
    read_model,
    train,
    train_references,
    write_model,
)
from glyphcast.convert import convert_image, grid_to_image, grid_to_text
from glyphcast.core import (
    Charset,
    FeatureMode,
    GlyphcastError,
    ModelKind,
    StageError,
    UsageError,
)
from glyphcast.eval import BenchConfig, classification_metrics, run_benchmark
from glyphcast.glyphset import (
    DEFAULT_CLASSICAL_COUNT,
    DEFAULT_DEEP_COUNT,
    DEFAULT_TEST_FRACTION,
    DEFAULT_TILE_SIZE,
    AugmentParams,
    export_csv,
    read_dataset,
    split,
    summarize_counts,
    synthesize,
    write_dataset,
)
from glyphcast.preprocess import DEFAULT_THRESHOLD, load_image, save_gray_png

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

# ============================================================
# Settings Loader (inline)
# ============================================================


def project_root() -> Path:
    """Return repository root (folder that contains configs/ and src/).

    Walk upwards from this file to find a directory that contains a
    `configs/` folder. Fallback to one level up from this file.
    """
    here = Path(__file__).resolve()
    for parent in here.parents:
        if (parent / "configs").exists():
            return parent
    return here.parents[1]


def _configs_dir() -> Path:
    return project_root() / "configs"


def _load_json(path: Path) -> dict:
    # no fallback: read and propagate errors if any
    with path.open("r", encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"expected object at {path}, got {type(data).__name__}")
    return data


@dataclass
class ModelDefaults:
    tile_size: int = DEFAULT_TILE_SIZE
    threshold: int = DEFAULT_THRESHOLD
    kinds: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "ModelDefaults":
        kinds = d.get("kinds") or {}
        if not isinstance(kinds, dict):
            raise ValueError("model.json 'kinds' must be an object")
        for name in kinds:
            ModelKind.parse(name)
        return ModelDefaults(
            tile_size=int(d.get("tile_size", DEFAULT_TILE_SIZE)),
            threshold=int(d.get("threshold", DEFAULT_THRESHOLD)),
            kinds={str(k): dict(v or {}) for k, v in kinds.items()},
        )

    def hyperparams(self, kind: ModelKind) -> Dict[str, Any]:
        return default_hyperparams(kind, self.kinds.get(kind.value))


@dataclass
class SynthDefaults:
    classical_count: int = DEFAULT_CLASSICAL_COUNT
    deep_count: int = DEFAULT_DEEP_COUNT
    augment: AugmentParams = field(default_factory=AugmentParams)

    @staticmethod
    def from_dict(d: Mapping[str, Any]) -> "SynthDefaults":
        return SynthDefaults(
            classical_count=int(d.get("classical_count", DEFAULT_CLASSICAL_COUNT)),
            deep_count=int(d.get("deep_count", DEFAULT_DEEP_COUNT)),
            augment=AugmentParams.from_dict(d.get("augment") or {}),
        )


def load_model_defaults() -> ModelDefaults:
    path = _configs_dir() / "model.json"
    if not path.exists():
        return ModelDefaults()
    return ModelDefaults.from_dict(_load_json(path))


def load_synth_defaults() -> SynthDefaults:
    path = _configs_dir() / "synth.json"
    if not path.exists():
        return SynthDefaults()
    return SynthDefaults.from_dict(_load_json(path))


def resolve_bench_config(name: str) -> Path:
    """``default`` selects the bundled configs/bench.toml; anything else is a path."""

    if name == "default":
        return _configs_dir() / "bench.toml"
    return Path(name)


# ============================================================
# Run events: bus, JSONL log, console
# ============================================================


class EventType(str, Enum):
    """Supported event categories for the CLI logging pipeline."""

    RUN_START = "run_start"
    RUN_END = "run_end"
    STAGE = "stage"
    METRIC = "metric"
    ARTIFACT = "artifact"
    ERROR = "error"
    NARRATIVE = "narrative"
    SYSTEM = "system"


def _clean_value(value: Any) -> Any:
    """Recursively remove ``None`` values and turn numpy scalars into plain ones."""

    if isinstance(value, dict):
        return {k: _clean_value(v) for k, v in value.items() if v is not None}
    if isinstance(value, (list, tuple)):
        return [_clean_value(v) for v in value if v is not None]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    return value


@dataclass
class Event:
    """Structured event emitted by the orchestrator and the library."""

    event_type: EventType
    phase: Optional[str] = None
    actor: Optional[str] = None
    step: Optional[int] = None
    data: Dict[str, Any] = field(default_factory=dict)
    timestamp: Optional[datetime] = None
    sequence: Optional[int] = None
    correlation_id: Optional[str] = None

    def __post_init__(self) -> None:
        if not isinstance(self.event_type, EventType):
            try:
                self.event_type = EventType(str(self.event_type))
            except ValueError as exc:
                raise ValueError(f"Unsupported event type: {self.event_type}") from exc
        if self.data is None:
            self.data = {}
        if not isinstance(self.data, dict):
            raise TypeError("Event.data must be a dict")
        self.data = _clean_value(self.data)

    @property
    def event_id(self) -> str:
        seq = self.sequence or 0
        return f"EVT-{seq:06d}"

    def assign_runtime_fields(self, sequence: int, timestamp: datetime) -> None:
        self.sequence = sequence
        self.timestamp = timestamp

    def validate(self) -> None:
        required_keys: Dict[EventType, List[str]] = {
            EventType.STAGE: ["stage"],
            EventType.METRIC: ["name", "value"],
            EventType.ARTIFACT: ["path"],
            EventType.ERROR: ["message"],
            EventType.NARRATIVE: ["text"],
        }
        expected = required_keys.get(self.event_type)
        if expected:
            missing = [key for key in expected if key not in self.data]
            if missing:
                raise ValueError(
                    f"Event '{self.event_type.value}' missing required fields: {', '.join(missing)}"
                )

    def to_dict(self) -> Dict[str, Any]:
        if self.timestamp is None or self.sequence is None:
            raise RuntimeError("event has not been published yet")
        payload: Dict[str, Any] = {
            "event_id": self.event_id,
            "sequence": self.sequence,
            "timestamp": self.timestamp.isoformat(),
            "event_type": self.event_type.value,
        }
        if self.phase is not None:
            payload["phase"] = self.phase
        if self.actor is not None:
            payload["actor"] = self.actor
        if self.step is not None:
            payload["step"] = self.step
        if self.correlation_id is not None:
            payload["correlation_id"] = self.correlation_id
        for k, v in self.data.items():
            payload[k] = v
        return payload


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


EventSink = Callable[[Event], None]


class EventBus:
    """Stamp each event with the run's next sequence number and hand it to every sink.

    Synthesis and rf tree workers publish from their own threads. Stamping and
    delivery share one lock, so sequence numbers in the JSONL file are in order.
    """

    def __init__(self) -> None:
        self._sinks: List[EventSink] = []
        self._sequence = count(1)
        self._lock = Lock()

    def subscribe(self, sink: EventSink) -> None:
        self._sinks.append(sink)

    def publish(self, event: Event) -> Event:
        event.validate()
        with self._lock:
            event.assign_runtime_fields(next(self._sequence), utc_now())
            for sink in self._sinks:
                sink(event)
        return event


class JsonlEventLog:
    """``run_events.jsonl``: one JSON object per event, flushed as it arrives."""

    def __init__(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.path = path
        self._file: TextIO = path.open("w", encoding="utf-8")

    def handle(self, event: Event) -> None:
        # the bus serializes publishers, so no lock here
        self._file.write(json.dumps(event.to_dict(), ensure_ascii=False) + "\n")
        self._file.flush()

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()


class ConsoleLogger:
    """Print human-readable lines for narrative and error events to stderr.

    ``quiet`` drops narrative but never errors. Stage and metric events only
    go to the structured log.
    """

    def __init__(self, stream: Optional[TextIO] = None, *, quiet: bool = False) -> None:
        self._stream = stream
        self._quiet = quiet

    def handle(self, event: Event) -> None:
        if event.event_type is EventType.NARRATIVE:
            if self._quiet:
                return
            line = str(event.data.get("text", ""))
        elif event.event_type is EventType.ERROR:
            line = f"error: {event.data.get('message', '')}"
        else:
            return
        stream = self._stream or sys.stderr
        stream.write(line + "\n")
        stream.flush()

    def close(self) -> None:
        return None


@dataclass
class LoggingContext:
    bus: EventBus
    jsonl: JsonlEventLog
    console: ConsoleLogger

    def close(self) -> None:
        self.jsonl.close()
        self.console.close()


def create_logging_context(
    log_dir: Optional[Path] = None, *, quiet: bool = False, stream: Optional[TextIO] = None
) -> LoggingContext:
    logs_dir = log_dir or (project_root() / "logs")
    events_path = logs_dir / "run_events.jsonl"

    bus = EventBus()
    jsonl = JsonlEventLog(events_path)
    console = ConsoleLogger(stream, quiet=quiet)

    bus.subscribe(jsonl.handle)
    bus.subscribe(console.handle)

    return LoggingContext(bus=bus, jsonl=jsonl, console=console)


EmitFn = Callable[..., None]


@dataclass
class Runtime:
    model: ModelDefaults
    synth: SynthDefaults
    root: Path
    threads: Optional[int]
    emit: EmitFn

    def say(self, text: str, *, phase: Optional[str] = None) -> None:
        self.emit(event_type="narrative", phase=phase, data={"text": text})


def _bootstrap_runtime(args: argparse.Namespace, emit: EmitFn) -> Runtime:
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    return Runtime(
        model=load_model_defaults(),
        synth=load_synth_defaults(),
        root=project_root(),
        threads=max(1, int(threads)),
        emit=emit,
    )


def _write_stdout(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    sys.stdout.flush()


# ============================================================
# Commands
# ============================================================


def cmd_synth(args: argparse.Namespace, rt: Runtime) -> int:
    mode = FeatureMode.parse(args.features)
    n = args.tile_size if args.tile_size is not None else rt.model.tile_size
    total = args.count if args.count is not None else rt.synth.classical_count
    rt.say(f"synthesizing {total} {mode.value} samples ({n}x{n} tiles, seed {args.seed})")
    ds = synthesize(
        Charset.default(), n, total, args.seed, mode, rt.synth.augment,
        threshold=rt.model.threshold, threads=rt.threads, emit=rt.emit,
    )
    out = write_dataset(ds, args.out)
    rt.emit(event_type="artifact", phase="synth", data={"path": str(out), "samples": len(ds)})
    if args.csv:
        csv_path = export_csv(ds, args.csv)
        rt.emit(event_type="artifact", phase="synth", data={"path": str(csv_path)})
    _write_stdout(json.dumps(summarize_counts(ds), ensure_ascii=False))
    return EXIT_OK


def _train_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {"k": args.k, "trees": args.trees, "epochs": args.epochs, "lr": args.lr,
             "batch": args.batch}
    return {k: v for k, v in flags.items() if v is not None}


def cmd_train(args: argparse.Namespace, rt: Runtime) -> int:
    kind = ModelKind.parse(args.kind)
    hp = rt.model.hyperparams(kind)
    hp.update(_train_overrides(args))

    if args.data is None:
        if kind is not ModelKind.AISS:
            raise UsageError(f"train --kind {kind.value} needs --data")
        n = args.tile_size if args.tile_size is not None else rt.model.tile_size
        model = train_references(Charset.default(), n, hp)
        out = write_model(model, args.out)
        rt.emit(event_type="artifact", phase="train", data={"path": str(out), "kind": kind.value})
        rt.say(f"built {kind.value} references for {n}x{n} tiles")
        return EXIT_OK

    ds = read_dataset(args.data)
    split_seed = args.split_seed if args.split_seed is not None else args.seed
    train_set, test_set = split(ds, args.test_fraction, split_seed)
    rt.say(f"training {kind.value} on {len(train_set)} samples, holding out {len(test_set)}")
    model = train(kind, train_set, hp, args.seed, threads=rt.threads, emit=rt.emit)
    scores = classification_metrics(
        predict_batch(model, test_set.features), test_set.labels, ds.charset.size
    )
    rt.emit(event_type="metric", phase="train",
            data={"name": "test_accuracy", "value": scores.accuracy})
    out = write_model(model, args.out)
    rt.emit(event_type="artifact", phase="train", data={"path": str(out), "kind": kind.value})
    _write_stdout(
        f"train_accuracy: {model.metadata['train_accuracy']:.4f}\n"
        f"test_accuracy: {scores.accuracy:.4f}\n"
        f"macro_f1: {scores.macro_f1:.4f}\n"
        f"macro_recall: {scores.macro_recall:.4f}"
    )
    return EXIT_OK


def cmd_convert(args: argparse.Namespace, rt: Runtime) -> int:
    model = read_model(args.model)
    img = load_image(args.image)
    threshold = args.threshold if args.threshold is not None else rt.model.threshold
    grid = convert_image(
        img,
        model,
        args.scale,
        threshold=threshold,
        invert=True if args.invert else None,
        aspect=not args.no_aspect,
        threads=rt.threads,
    )
    text = grid_to_text(grid)
    rt.emit(event_type="stage", phase="convert",
            data={"stage": "convert", "rows": grid.rows, "cols": grid.cols})
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
        rt.emit(event_type="artifact", phase="convert", data={"path": str(out)})
    else:
        _write_stdout(text)
    if args.render_png:
        png = save_gray_png(grid_to_image(grid, model.tile_size), args.render_png)
        rt.emit(event_type="artifact", phase="convert", data={"path": str(png)})
    return EXIT_OK


def cmd_bench(args: argparse.Namespace, rt: Runtime) -> int:
    path = resolve_bench_config(args.config)
    config = BenchConfig.from_toml(path)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    rt.say(f"benchmark {path.name}: {len(config.techniques())} technique(s), seed {config.seed}")
    report = run_benchmark(config, threads=rt.threads, emit=rt.emit)
    if args.csv:
        csv_path = Path(args.csv)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(report.to_csv(), encoding="utf-8")
        rt.emit(event_type="artifact", phase="bench", data={"path": str(csv_path)})
    _write_stdout(report.to_json() if args.json else report.to_table())
    failed = [c.name for c in report.checks if not c.passed]
    if failed:
        rt.say(f"acceptance checks failed: {', '.join(failed)}", phase="bench")
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Runtime], int]] = {
    "synth": cmd_synth,
    "train": cmd_train,
    "convert": cmd_convert,
    "bench": cmd_bench,
}


# ============================================================
# Argument parsing
# ============================================================


class _ArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; the CLI contract reserves 2 for data errors."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_args(argv: List[str]) -> argparse.Namespace:
    p = _ArgumentParser(prog="glyphcast", description="Structure-based ASCII art")
    p.add_argument("--version", action="version", version=f"glyphcast {__version__}")
    p.add_argument(
        "--log-dir", default=None, help="Directory for run_events.jsonl (default ./logs)"
    )
    p.add_argument("--quiet", action="store_true", help="Suppress narrative lines on stderr")
    p.add_argument("--threads", type=int, default=None, help="Worker cap (default: CPU count)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    s = sub.add_parser("synth", help="Generate a glyph tile dataset (GCDS)")
    s.add_argument("--count", type=int, default=None, help="Samples (default from synth.json)")
    s.add_argument("--tile-size", type=int, default=None)
    s.add_argument("--features", choices=[m.value for m in FeatureMode], default="raw")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--csv", default=None, help="Also export label,f0.. rows as CSV")

    t = sub.add_parser("train", help="Train a classifier and write a model file (GCMA)")
    t.add_argument("--kind", required=True, choices=[k.value for k in ModelKind])
    t.add_argument("--data", default=None, help="GCDS dataset (optional for aiss)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.add_argument("--tile-size", type=int, default=None, help="aiss without --data only")
    t.add_argument("--test-fraction", type=float, default=DEFAULT_TEST_FRACTION)
    t.add_argument("--split-seed", type=int, default=None, help="Default: --seed")
    t.add_argument("--k", type=int, default=None)
    t.add_argument("--trees", type=int, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch", type=int, default=None)

    c = sub.add_parser("convert", help="Convert an image to ASCII art")
    c.add_argument("--model", required=True)
    c.add_argument("--image", required=True)
    c.add_argument("--scale", type=float, default=1.0)
    c.add_argument("--threshold", type=int, default=None, help="Default from model.json (128)")
    c.add_argument("--invert", action="store_true", help="Light strokes on a dark background")
    c.add_argument("--no-aspect", action="store_true", help="Keep the height (no 2:1 squash)")
    c.add_argument("--out", default=None, help="Write text here instead of stdout")
    c.add_argument("--render-png", default=None, help="Also render the glyphs to a PNG")

    b = sub.add_parser("bench", help="Run the technique comparison benchmark")
    b.add_argument("--config", default="default", help="TOML file, or 'default'")
    b.add_argument("--seed", type=int, default=None, help="Override the config seed")
    b.add_argument("--json", action="store_true")
    b.add_argument("--csv", default=None, help="Also write report rows as CSV")
    return p.parse_args(argv)


# ============================================================
# Entry point
# ============================================================


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = _parse_args(list(sys.argv[1:] if argv is None else argv))
    except SystemExit as exc:
        # argparse already printed usage; nothing is logged before --log-dir is known
        return int(exc.code or 0)

    log_ctx = create_logging_context(
        Path(args.log_dir) if args.log_dir else None, quiet=args.quiet
    )

    # Emit function adapter
    def emit(*, event_type: str, actor=None, phase=None, step=None, data=None) -> None:
        ev = Event(
            event_type=EventType(event_type),
            actor=actor if actor is not None else args.command,
            phase=phase,
            step=step,
            data=dict(data or {}),
        )
        log_ctx.bus.publish(ev)

    emit(event_type="run_start", data={"command": args.command, "version": __version__})
    code = EXIT_INTERNAL
    try:
        rt = _bootstrap_runtime(args, emit)
        code = COMMANDS[args.command](args, rt)
    except UsageError as exc:
        code = EXIT_USAGE
        _emit_error(emit, exc, exc.error_type)
    except StageError as exc:
        code = EXIT_DATA
        _emit_error(emit, exc, exc.error_type, stage=exc.stage, technique=exc.technique)
    except GlyphcastError as exc:
        code = EXIT_DATA
        _emit_error(emit, exc, exc.error_type)
    except (OSError, ValueError) as exc:
        code = EXIT_DATA
        _emit_error(emit, exc, type(exc).__name__)
    except Exception as exc:  # pragma: no cover - last resort
        code = EXIT_INTERNAL
        _emit_error(emit, exc, "internal")
    finally:
        try:
            emit(event_type="run_end", data={"command": args.command, "exit_code": code})
        finally:
            log_ctx.close()
    return code


def _emit_error(emit: EmitFn, exc: BaseException, error_type: str, **extra: Any) -> None:
    emit(
        event_type="error",
        phase="run",
        data={
            "message": str(exc),
            "error_type": error_type,
            "exception": type(exc).__name__,
            **extra,
        },
    )


if __name__ == "__main__":
    sys.exit(main())

__all__ = [
    "ConsoleLogger",
    "Event",
    "EventBus",
    "EventType",
    "JsonlEventLog",
    "LoggingContext",
    "ModelDefaults",
    "SynthDefaults",
    "create_logging_context",
    "main",
    "project_root",
    "resolve_bench_config",
]
