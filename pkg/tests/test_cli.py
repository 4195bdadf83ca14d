from __future__ import annotations

import json
from dataclasses import replace

import pytest

from glyphcast.classify import train, write_model
from glyphcast.preprocess import save_gray_png
from src.main import main


def _events(log_dir):
    path = log_dir / "run_events.jsonl"
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]


@pytest.fixture
def run(tmp_path, capsys):
    log_dir = tmp_path / "logs"

    def _run(*argv):
        code = main(["--log-dir", str(log_dir), "--threads", "2", *argv])
        out, err = capsys.readouterr()
        return code, out, err

    _run.log_dir = log_dir
    return _run


def test_synth_prints_counts_and_is_reproducible(tmp_path, run):
    code, out, err = run(
        "synth", "--count", "190", "--seed", "2", "--out", str(tmp_path / "a.gcds")
    )
    assert code == 0
    counts = json.loads(out)
    assert counts[" "] == 2 and sum(counts.values()) == 190
    assert "synthesizing 190 raw samples" in err

    run("--quiet", "synth", "--count", "190", "--seed", "2", "--out", str(tmp_path / "b.gcds"))
    assert (tmp_path / "a.gcds").read_bytes() == (tmp_path / "b.gcds").read_bytes()


def test_synth_csv_export(tmp_path, run):
    code, _, _ = run(
        "synth", "--count", "95", "--features", "hog",
        "--out", str(tmp_path / "h.gcds"), "--csv", str(tmp_path / "h.csv"),
    )
    assert code == 0
    header = (tmp_path / "h.csv").read_text().splitlines()[0]
    assert len(header.split(",")) == 37


def test_train_with_data_reports_scores(tmp_path, run):
    data = tmp_path / "d.gcds"
    run("synth", "--count", "190", "--out", str(data))
    code, out, _ = run(
        "train", "--kind", "knn", "--k", "1",
        "--data", str(data), "--out", str(tmp_path / "knn.gcma"),
    )
    assert code == 0
    keys = [line.split(":")[0] for line in out.splitlines()]
    assert keys == ["train_accuracy", "test_accuracy", "macro_f1", "macro_recall"]
    assert (tmp_path / "knn.gcma").read_bytes()[:4] == b"GCMA"


def test_train_without_data_needs_aiss(tmp_path, run):
    code, _, err = run("train", "--kind", "cnn", "--out", str(tmp_path / "m.gcma"))
    assert code == 1
    assert "error: train --kind cnn needs --data" in err
    events = _events(run.log_dir)
    assert events[-2]["event_type"] == "error" and events[-2]["error_type"] == "usage"
    assert events[-1]["event_type"] == "run_end" and events[-1]["exit_code"] == 1

    code, _, _ = run("train", "--kind", "aiss", "--out", str(tmp_path / "aiss.gcma"))
    assert code == 0


def test_convert_to_stdout_file_and_png(tmp_path, run, line_image):
    model = tmp_path / "aiss.gcma"
    image = save_gray_png(line_image, tmp_path / "lines.png")
    run("train", "--kind", "aiss", "--out", str(model))

    code, out, _ = run("convert", "--model", str(model), "--image", str(image), "--no-aspect")
    assert code == 0
    lines = out.rstrip("\n").split("\n")
    assert len(lines) == 3 and all(len(line) == 4 for line in lines)

    code, out, _ = run(
        "convert", "--model", str(model), "--image", str(image),
        "--out", str(tmp_path / "art.txt"), "--render-png", str(tmp_path / "art.png"),
    )
    assert code == 0 and out == ""
    assert len((tmp_path / "art.txt").read_text().splitlines()) == 2
    assert (tmp_path / "art.png").exists()
    kinds = [e["event_type"] for e in _events(run.log_dir)]
    assert kinds.count("artifact") == 2


def test_data_errors_exit_2(tmp_path, run):
    broken = tmp_path / "broken.gcma"
    broken.write_bytes(b"GCMA\x00")
    code, _, err = run("convert", "--model", str(broken), "--image", str(tmp_path / "x.png"))
    assert code == 2
    assert err.startswith("error:")

    model = tmp_path / "aiss.gcma"
    run("train", "--kind", "aiss", "--out", str(model))
    code, _, _ = run("convert", "--model", str(model), "--image", str(tmp_path / "missing.png"))
    assert code == 2


def test_model_missing_hyperparameter_exits_2(tmp_path, run, clean_raw_set, line_image):
    model = write_model(
        replace(train("knn", clean_raw_set, {"k": 1}), hyperparams={}), tmp_path / "knn.gcma"
    )
    image = save_gray_png(line_image, tmp_path / "lines.png")
    code, _, err = run("convert", "--model", str(model), "--image", str(image))
    assert code == 2
    assert "missing hyperparameter 'k'" in err
    errors = [e for e in _events(run.log_dir) if e["event_type"] == "error"]
    assert errors[-1]["error_type"] == "missing_param"


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--out", "m.gcma"],
        ["convert", "--model", "m.gcma"],
        ["synth", "--features", "sift", "--out", "d.gcds"],
        ["paint"],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert "usage:" in capsys.readouterr().err


def test_version(capsys):
    assert main(["--version"]) == 0
    assert capsys.readouterr().out.startswith("glyphcast ")


def test_bench_json_and_csv(tmp_path, run):
    cfg = tmp_path / "bench.toml"
    cfg.write_text(
        "classical_count = 95\n"
        'kinds = ["aiss"]\n'
        "hog_kinds = []\n"
        "repetitions = 1\n"
        'fixtures = ["circle"]\n'
        "fixture_size = 32\n"
        "heldout_count = 190\n"
    )
    code, out, _ = run(
        "bench", "--config", str(cfg), "--seed", "5", "--json", "--csv", str(tmp_path / "r.csv")
    )
    assert code == 0
    report = json.loads(out)
    assert report["environment"]["seed"] == 5
    assert [r["name"] for r in report["rows"]] == ["aiss"]
    assert (tmp_path / "r.csv").read_text().startswith("name,features")
    events = _events(run.log_dir)
    assert events[0]["event_type"] == "run_start"
    assert {"fixtures", "baselines", "synth", "train", "evaluate", "convert"} <= {
        e["stage"] for e in events if e["event_type"] == "stage"
    }


def test_bench_stage_failure_is_reported(tmp_path, run):
    cfg = tmp_path / "bench.toml"
    cfg.write_text('kinds = ["aiss"]\nhog_kinds = []\nfixtures = ["nope"]\n')
    code, _, err = run("bench", "--config", str(cfg))
    assert code == 2
    assert "[fixtures]" in err
    error = [e for e in _events(run.log_dir) if e["event_type"] == "error"][0]
    assert error["stage"] == "fixtures"
