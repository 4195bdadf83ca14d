from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from src.main import (
    ConsoleLogger,
    Event,
    EventBus,
    EventType,
    JsonlEventLog,
    create_logging_context,
)


def test_event_serialisation_drops_none(tmp_path):
    bus = EventBus()
    log = JsonlEventLog(tmp_path / "events.jsonl")
    bus.subscribe(log.handle)

    event = Event(
        event_type=EventType.METRIC,
        actor="train",
        phase="train:knn",
        data={"name": "train_accuracy", "value": np.float64(0.5), "epoch": None},
    )
    bus.publish(event)
    log.close()

    content = (tmp_path / "events.jsonl").read_text(encoding="utf-8").strip()
    record = json.loads(content)
    assert record["actor"] == "train"
    assert record["phase"] == "train:knn"
    assert record["value"] == 0.5
    assert record["event_id"] == "EVT-000001"
    assert "epoch" not in record


def test_narrative_event_requires_text():
    bus = EventBus()
    event = Event(event_type=EventType.NARRATIVE, actor="synth", data={})
    with pytest.raises(ValueError, match="missing required fields"):
        bus.publish(event)


def test_unknown_event_type_is_rejected():
    with pytest.raises(ValueError, match="Unsupported event type"):
        Event(event_type="action")
    assert Event(event_type="stage", data={"stage": "x"}).event_type is EventType.STAGE


def test_console_logger_prints_narrative_and_errors():
    stream = io.StringIO()
    bus = EventBus()
    bus.subscribe(ConsoleLogger(stream).handle)
    bus.publish(Event(event_type=EventType.NARRATIVE, data={"text": "Hello"}))
    bus.publish(Event(event_type=EventType.METRIC, data={"name": "ssim", "value": 0.7}))
    bus.publish(Event(event_type=EventType.ERROR, data={"message": "bad tile"}))
    assert stream.getvalue() == "Hello\nerror: bad tile\n"


def test_quiet_console_keeps_errors():
    stream = io.StringIO()
    console = ConsoleLogger(stream, quiet=True)
    bus = EventBus()
    bus.subscribe(console.handle)
    bus.publish(Event(event_type=EventType.NARRATIVE, data={"text": "Hello"}))
    bus.publish(Event(event_type=EventType.ERROR, data={"message": "bad tile"}))
    assert stream.getvalue() == "error: bad tile\n"


def test_logging_context_sequences_events(tmp_path):
    stream = io.StringIO()
    ctx = create_logging_context(tmp_path, stream=stream)
    for i in range(3):
        ctx.bus.publish(Event(event_type=EventType.STAGE, data={"stage": f"s{i}"}))
    ctx.close()
    lines = (tmp_path / "run_events.jsonl").read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["sequence"] for line in lines] == [1, 2, 3]
    assert stream.getvalue() == ""


def test_threaded_publishers_write_in_sequence_order(tmp_path):
    ctx = create_logging_context(tmp_path, stream=io.StringIO())

    def publish(i):
        ctx.bus.publish(Event(event_type=EventType.METRIC, data={"name": "tree", "value": i}))

    with ThreadPoolExecutor(max_workers=4) as pool:
        list(pool.map(publish, range(200)))
    ctx.close()
    lines = (tmp_path / "run_events.jsonl").read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["sequence"] for line in lines] == list(range(1, 201))
    assert sorted(json.loads(line)["value"] for line in lines) == list(range(200))
