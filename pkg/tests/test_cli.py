"""End-to-end command line checks; heavy work is kept to a few epochs."""

import csv
import hashlib
import json
import logging
import shutil
import subprocess

import pytest

from breathline.cli import main, _setup_logging
from breathline.nn import load_model


def _digests(root):
    """filename -> sha256, skipping the timestamped run log."""
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file() and path.name != "run.log":
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def _read_stats(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_synth_writes_corpus_and_is_reproducible(tmp_path):
    args = ["synth", "--seed", "9", "--real", "2", "--fake", "1",
            "--duration-ms", "8000", "--speakers", "2"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0

    names = {p.name for p in a.iterdir()}
    assert {"manifest.csv", "meta.json", "run.log"} <= names
    assert len([n for n in names if n.endswith(".wav")]) == 3
    assert len([n for n in names if n.endswith(".tsv")]) == 3
    meta = json.loads((a / "meta.json").read_text())
    assert meta["seed"] == 9 and len(meta["config_digest"]) == 16
    assert _digests(a) == _digests(b)


def test_synth_infeasible_config_exits_2(tmp_path, capsys):
    rc = main(["synth", "--out", str(tmp_path / "x"), "--real", "1", "--fake", "0",
               "--duration-ms", "5000", "--bpm-min", "400", "--bpm-max", "400"])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_train_breath_cli(tmp_path, podcast_dir):
    args = ["train-breath", "--manifest", str(podcast_dir / "manifest.csv"),
            "--epochs", "2", "--lstm-units", "8", "--seed", "4"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0

    model = load_model(a / "model.bin")
    assert model.config.lstm_units == 8 and model.config.seed == 4
    report = json.loads((a / "training_report.json").read_text())
    assert len(report["loss_history"]) == 2
    assert report["num_files"] == 3
    assert (a / "model.bin").read_bytes() == (b / "model.bin").read_bytes()


def test_train_breath_missing_annotation_names_entry(tmp_path, podcast_dir, capsys):
    rows = (podcast_dir / "manifest.csv").read_text().splitlines()
    broken = [rows[0]]
    for line in rows[1:]:
        cells = line.split(",")
        if cells[0] == "real-0001":
            cells[6] = ""
        broken.append(",".join(cells))
    manifest = tmp_path / "manifest.csv"
    manifest.write_text("\n".join(broken) + "\n")
    for item in podcast_dir.iterdir():
        if item.suffix in (".wav", ".tsv"):
            shutil.copy(item, tmp_path / item.name)

    rc = main(["train-breath", "--manifest", str(manifest), "--out", str(tmp_path / "out"),
               "--epochs", "1"])
    assert rc == 1
    assert "real-0001" in capsys.readouterr().err


def test_detect_cli_real_files(tmp_path, podcast_dir, detector):
    _, model_path = detector
    out = tmp_path / "det"
    rc = main(["detect", "--manifest", str(podcast_dir / "manifest.csv"),
               "--model", str(model_path), "--out", str(out), "--workers", "2"])
    assert rc == 0
    rows = _read_stats(out / "stats.csv")
    assert [r["id"] for r in rows] == ["real-0000", "real-0001", "real-0002"]
    assert all(float(r["bpm"]) > 0 for r in rows)
    assert all((out / "intervals" / f"{r['id']}.tsv").exists() for r in rows)
    report = json.loads((out / "detect_report.json").read_text())
    assert report["ok"] == [r["id"] for r in rows] and report["errors"] == {}


def test_detect_cli_fake_files_have_zero_stats(tmp_path, detector):
    _, model_path = detector
    corpus = tmp_path / "fake"
    assert main(["synth", "--out", str(corpus), "--seed", "30", "--real", "0",
                 "--fake", "2", "--duration-ms", "12000", "--speakers", "1"]) == 0
    out = tmp_path / "det"
    assert main(["detect", "--manifest", str(corpus / "manifest.csv"),
                 "--model", str(model_path), "--out", str(out)]) == 0
    rows = _read_stats(out / "stats.csv")
    assert len(rows) == 2
    for row in rows:
        assert row["label"] == "fake"
        assert (row["bpm"], row["avg_duration_ms"], row["avg_spacing_ms"]) == ("0", "0", "0")


def test_detect_cli_skips_unreadable_file(tmp_path, podcast_dir, detector):
    _, model_path = detector
    corpus = tmp_path / "corpus"
    shutil.copytree(podcast_dir, corpus)
    (corpus / "real-0002.wav").write_bytes(b"RIFFnot-audio")
    out = tmp_path / "det"
    assert main(["detect", "--manifest", str(corpus / "manifest.csv"),
                 "--model", str(model_path), "--out", str(out)]) == 0
    rows = _read_stats(out / "stats.csv")
    assert [r["id"] for r in rows] == ["real-0000", "real-0001"]
    report = json.loads((out / "detect_report.json").read_text())
    assert list(report["errors"]) == ["real-0002"]


def test_detect_cli_all_failures_exit_1(tmp_path, podcast_dir, detector):
    _, model_path = detector
    manifest = tmp_path / "manifest.csv"
    manifest.write_text((podcast_dir / "manifest.csv").read_text())
    rc = main(["detect", "--manifest", str(manifest),
               "--model", str(model_path), "--out", str(tmp_path / "det")])
    assert rc == 1


def test_evaluate_test1_cli(tmp_path, podcast_dir):
    out = tmp_path / "eval"
    rc = main(["evaluate", "--experiment", "test1", "--iterations", "2",
               "--manifest", str(podcast_dir / "manifest.csv"), "--out", str(out),
               "--epochs", "2", "--lstm-units", "8", "--seed", "6"])
    assert rc == 0
    doc = json.loads((out / "experiment_test1.json").read_text())
    assert doc["experiment"] == "test1" and len(doc["values"]) == 2
    assert 0.0 <= doc["mean"] <= 1.0
    svg = (out / "experiment_test1.svg").read_text()
    assert svg.startswith("<svg ")


def test_evaluate_pipeline_cli(tmp_path, news_dir, detector):
    _, model_path = detector
    out = tmp_path / "pipe"
    rc = main(["evaluate", "--experiment", "pipeline", "--classifier", "svc",
               "--svc-coef0", "1.0", "--manifest", str(news_dir / "manifest.csv"),
               "--model", str(model_path), "--out", str(out), "--seed", "0"])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["positive_label"] == "real"
    assert 0.0 <= report["auprc"] <= 1.0
    assert report["extra"]["outlet_overlap"] == 0
    assert (out / "scores.csv").exists()
    assert (out / "classifier_svc.bin").exists()
    assert len(_read_stats(out / "stats.csv")) == 16
    assert (out / "stats_scatter.svg").read_text().startswith("<svg ")


def test_evaluate_pipeline_threshold_writes_no_scores(tmp_path, news_dir, detector):
    _, model_path = detector
    out = tmp_path / "pipe"
    rc = main(["evaluate", "--experiment", "pipeline", "--classifier", "threshold",
               "--manifest", str(news_dir / "manifest.csv"),
               "--model", str(model_path), "--out", str(out)])
    assert rc == 0
    assert not (out / "scores.csv").exists()
    assert json.loads((out / "report.json").read_text())["auprc"] is None


def test_evaluate_pipeline_needs_a_detector(tmp_path, news_dir, capsys):
    rc = main(["evaluate", "--experiment", "pipeline",
               "--manifest", str(news_dir / "manifest.csv"), "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "--model or --podcast-manifest" in capsys.readouterr().err


def test_unknown_experiment_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--experiment", "test9",
              "--manifest", "m.csv", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_version_runs_from_installed_script():
    proc = subprocess.run(["breathline", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.startswith("breathline ")


def test_log_level_env(monkeypatch):
    seen = {}
    monkeypatch.setattr(logging, "basicConfig", lambda **kw: seen.update(kw))
    monkeypatch.setenv("BREATHLINE_LOG", "debug")
    _setup_logging()
    assert seen["level"] == logging.DEBUG
    monkeypatch.setenv("BREATHLINE_LOG", "loud")
    _setup_logging()
    assert seen["level"] == logging.WARNING
