"""Command-line interface: subcommand behavior, file outputs, exit codes, and
one full subprocess smoke test of the live feed."""

from __future__ import annotations

import json
import shutil
import subprocess
import sys
import time
from http.client import HTTPConnection

import pytest

from classgauge.cli import main
from classgauge.synth import make_calibration_corpus


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ---------------------------------------------------------------------------
# run


def test_run_offline_writes_scores_and_report(tmp_path, engaged_session, capsys):
    root, _ = engaged_session
    out = tmp_path / "out"
    code, stdout, stderr = run_cli(
        capsys, "run", "--session", str(root), "--out", str(out), "--report",
    )
    assert code == 0

    lines = [l for l in stdout.splitlines() if l]
    assert len(lines) == 1
    card = json.loads(lines[0])
    assert card["segment"] == {
        "index": 0, "start": 0, "end": 599, "mode": "manual",
        "slice_minutes": 3, "significant": True,
    }
    assert card["students"][0]["id"] == "S1"
    assert card["students"][0]["score"] == 100.0
    assert card["presentation"]["score"] == 100.0

    assert (out / "scorecards.jsonl").read_text().strip() == lines[0]
    assert (out / "predictions.jsonl").is_file()
    assert (out / "scores.csv").is_file()
    for figure in ("engagement_scores.png", "presentation_score.png"):
        path = out / figure
        assert path.is_file()
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert f"report table: {out / 'scores.csv'}" in stderr
    assert stderr.count("report figure:") == 2


def test_run_slice_override_and_debug_export(tmp_path, empty_session, capsys):
    root, _ = empty_session
    debug_dir = tmp_path / "trace"
    code, stdout, _ = run_cli(
        capsys, "run", "--session", str(root),
        "--slice", "15", "--debug-export", str(debug_dir),
    )
    assert code == 0
    card = json.loads(stdout.splitlines()[0])
    assert card["segment"]["mode"] == "manual"
    assert card["segment"]["slice_minutes"] == 15
    assert card["segment"]["end"] == 239

    assert (debug_dir / "events.jsonl").read_text() == ""
    segments = [json.loads(l)
                for l in (debug_dir / "segments.jsonl").read_text().splitlines()]
    assert segments == [{"start": 0, "end": 239, "significant": True, "mode": "manual"}]
    assert (debug_dir / "gaze_samples.jsonl").stat().st_size > 0


def test_run_auto_mode_on_static_deck_emits_nothing(empty_session, capsys):
    # a single never-changing slide is one insignificant automatic segment
    root, _ = empty_session
    code, stdout, _ = run_cli(capsys, "run", "--session", str(root), "--mode", "auto")
    assert code == 0
    assert stdout.strip() == ""


# ---------------------------------------------------------------------------
# evaluate


def write_jsonl(path, records):
    path.write_text(
        "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in records),
        encoding="utf-8",
    )
    return path


def test_evaluate_reports_overall_and_per_student(tmp_path, capsys):
    predictions = write_jsonl(tmp_path / "pred.jsonl", [
        {"segment": 0, "student": "S1", "prediction": "engaged"},
        {"segment": 1, "student": "S1", "prediction": "non-engaged"},
        {"segment": 2, "student": "S1", "prediction": "na"},
        {"segment": 0, "student": "S2", "prediction": "non-engaged"},
        {"segment": 1, "student": "S2", "prediction": "engaged"},
        {"segment": 2, "student": "S2", "prediction": "non-engaged"},
    ])
    labels = write_jsonl(tmp_path / "labels.jsonl", [
        {"segment": 0, "student": "S1", "label": "engaged"},
        {"segment": 1, "student": "S1", "label": "non-engaged"},
        {"segment": 2, "student": "S1", "label": "engaged"},
        {"segment": 0, "student": "S2", "label": "non-engaged"},
        {"segment": 1, "student": "S2", "label": "engaged"},
        {"segment": 2, "student": "S2", "label": "non-engaged"},
    ])
    code, stdout, _ = run_cli(
        capsys, "evaluate", "--pred", str(predictions), "--labels", str(labels),
    )
    assert code == 0
    report = json.loads(stdout)
    assert set(report) == {"overall", "per_student"}
    assert report["overall"]["f_beta"] == 1.0
    assert report["overall"]["beta"] == 2.0
    assert report["overall"]["counts"] == {
        "true_positive": 2, "false_positive": 0,
        "true_negative": 3, "false_negative": 0, "excluded": 1,
    }
    assert set(report["per_student"]) == {"S1", "S2"}
    assert report["per_student"]["S1"]["f_beta"] == 1.0
    assert report["per_student"]["S1"]["counts"]["excluded"] == 1
    assert report["per_student"]["S2"]["f_beta"] == 1.0


def test_evaluate_custom_beta(tmp_path, capsys):
    predictions = write_jsonl(tmp_path / "p.jsonl", [
        {"segment": 0, "student": "S1", "prediction": "engaged"},
        {"segment": 1, "student": "S1", "prediction": "non-engaged"},
    ])
    labels = write_jsonl(tmp_path / "l.jsonl", [
        {"segment": 0, "student": "S1", "label": "engaged"},
        {"segment": 1, "student": "S1", "label": "non-engaged"},
    ])
    code, stdout, _ = run_cli(
        capsys, "evaluate", "--pred", str(predictions), "--labels", str(labels),
        "--beta", "0.5",
    )
    assert code == 0
    assert json.loads(stdout)["overall"]["beta"] == 0.5


# ---------------------------------------------------------------------------
# calibrate-dh


def test_calibrate_on_separable_corpus(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    code, stdout, stderr = run_cli(capsys, "synth-corpus", str(corpus), "--frames", "5")
    assert code == 0
    assert f"wrote calibration corpus to {corpus}" in stderr

    code, stdout, _ = run_cli(capsys, "calibrate-dh", "--corpus", str(corpus))
    assert code == 0
    result = json.loads(stdout)
    assert result["separable"] is True
    assert result["default_ok"] is True
    assert result["max_matched"] < result["recommended"] < result["min_mismatched"]
    assert result["default"] == 0.25


def test_calibrate_overlapping_corpus_fails_loudly(tmp_path, capsys):
    source = tmp_path / "source"
    make_calibration_corpus(source, seed=0, frames=4)
    overlap = tmp_path / "overlap"
    # identical pixel content filed under two names: matched and mismatched
    # distances coincide, so no threshold can separate them
    shutil.copytree(source / "deck0", overlap / "one")
    shutil.copytree(source / "deck0", overlap / "two")
    code, stdout, stderr = run_cli(capsys, "calibrate-dh", "--corpus", str(overlap))
    assert code == 1
    result = json.loads(stdout)
    assert result["separable"] is False
    assert result["recommended"] is None
    assert "no usable threshold" in stderr


def test_calibrate_missing_corpus_dir(tmp_path, capsys):
    code, _, stderr = run_cli(
        capsys, "calibrate-dh", "--corpus", str(tmp_path / "absent"),
    )
    assert code == 2
    assert "corpus directory not found" in stderr


# ---------------------------------------------------------------------------
# bench / synth-session


def test_bench_prints_summary(capsys):
    code, stdout, _ = run_cli(
        capsys, "bench", "--frames", "30", "--width", "160", "--height", "120",
        "--students", "1", "--fps", "10",
    )
    assert code == 0
    result = json.loads(stdout)
    assert result["frames"] == 30
    assert result["budget_ms"] == 100.0
    assert result["mean_ms"] > 0


def test_synth_session_writes_and_prints_manifest(tmp_path, capsys):
    out = tmp_path / "session"
    code, stdout, stderr = run_cli(
        capsys, "synth-session", str(out), "--scenario", "empty", "--seed", "1",
    )
    assert code == 0
    manifest = json.loads(stdout)
    assert manifest["scenario"] == "empty"
    assert (out / "session.cfg").is_file()
    assert (out / "manifest.json").is_file()
    assert "wrote scenario 'empty'" in stderr


def test_unknown_scenario_is_a_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["synth-session", str(tmp_path / "x"), "--scenario", "bogus"])
    assert err.value.code == 2
    capsys.readouterr()


# ---------------------------------------------------------------------------
# live feed subprocess smoke


def test_serve_smoke_over_subprocess(empty_session):
    root, _ = empty_session
    proc = subprocess.Popen(
        [sys.executable, "-m", "classgauge", "run",
         "--session", str(root), "--serve", "0", "--pace", "0",
         "--linger", "2.0"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    try:
        first = proc.stdout.readline().strip()
        assert first.startswith("FEED_PORT=")
        port = int(first.split("=", 1)[1])
        banner = proc.stdout.readline()
        assert f"127.0.0.1:{port}/feed" in banner

        deadline = time.monotonic() + 60
        state = None
        while time.monotonic() < deadline:
            conn = HTTPConnection("127.0.0.1", port, timeout=5)
            try:
                conn.request("GET", "/state")
                state = json.loads(conn.getresponse().read())
            except (ConnectionError, OSError):
                break  # linger elapsed and the server shut down
            finally:
                conn.close()
            if state["ended"]:
                break
            time.sleep(0.1)
        assert state is not None
        assert state["ended"] is True
        assert state["events"] == 2  # one scorecard + the end marker

        stdout, stderr = proc.communicate(timeout=60)
        assert proc.returncode == 0
        cards = [json.loads(l) for l in stdout.splitlines() if l.startswith("{")]
        assert len(cards) == 1
        assert cards[0]["segment"]["start"] == 0
        assert cards[0]["segment"]["end"] == 239
        assert "dropped frames" not in stderr
    finally:
        if proc.poll() is None:
            proc.kill()
            proc.communicate()
