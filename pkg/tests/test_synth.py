"""Synthetic session generator: determinism, manifest ground truth, and the
exactness of the rendered face trajectories."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from oracles import reference_project

from classgauge.ingest import (
    CANDIDATE_LANDMARK_INDICES,
    DEFAULT_FACE_MODEL,
    CameraIntrinsics,
    frame_dir_size,
    iter_frame_dir,
    load_session_config,
    open_streams,
)
from classgauge.synth import (
    SCENARIOS,
    acceptance_deck,
    face_records,
    make_calibration_corpus,
    triangle_wave,
    write_scenario_session,
)


def tree_digest(root: Path) -> dict[str, str]:
    digests = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digests[str(path.relative_to(root))] = hashlib.blake2b(
                path.read_bytes()
            ).hexdigest()
    return digests


def test_scenario_is_reproducible_byte_for_byte(tmp_path):
    first = tmp_path / "one"
    second = tmp_path / "two"
    m1 = write_scenario_session(first, scenario="empty", seed=3)
    m2 = write_scenario_session(second, scenario="empty", seed=3)
    assert m1 == m2
    d1, d2 = tree_digest(first), tree_digest(second)
    assert d1.keys() == d2.keys()
    assert d1 == d2
    assert "session.cfg" in d1 and "manifest.json" in d1 and "labels.jsonl" in d1


def test_unknown_scenario_rejected(tmp_path):
    with pytest.raises(ValueError, match="unknown scenario"):
        write_scenario_session(tmp_path, scenario="chaos")


def test_known_scenarios_listed():
    assert set(SCENARIOS) == {
        "mixed", "engaged", "reading", "video", "mobile", "distracted",
        "empty", "auto",
    }


def test_mixed_manifest_describes_the_session(mixed_session):
    root, manifest = mixed_session
    assert manifest["scenario"] == "mixed"
    assert manifest["mode"] == "manual"
    assert manifest["slice_minutes"] == 3
    assert manifest["fps"] == 10
    assert manifest["frames"] == 600
    assert manifest["expected_segments"] == 1
    assert manifest["events_per_segment"] == len(manifest["events"]) == 5
    for start, end in manifest["events"]:
        assert 0 <= start < end < manifest["frames"]
        assert end - start + 1 == 4 * manifest["fps"]
    assert set(manifest["students"]) == {"S_eng", "S_read", "S_vid", "S_mob", "S_dist"}
    assert manifest["labels"]["S_eng"] == "engaged"
    assert all(
        manifest["labels"][sid] == "non-engaged"
        for sid in manifest["students"] if sid != "S_eng"
    )
    assert json.loads((root / "manifest.json").read_text()) == manifest

    # labels.jsonl covers every (segment, student) pair exactly once
    lines = [json.loads(l) for l in (root / "labels.jsonl").read_text().splitlines()]
    keys = {(l["segment"], l["student"]) for l in lines}
    assert len(keys) == len(lines) == manifest["expected_segments"] * 5
    for entry in lines:
        assert entry["label"] == manifest["labels"][entry["student"]]


def test_mixed_session_streams_open_and_match_declared_geometry(mixed_session):
    root, manifest = mixed_session
    streams = open_streams(root)
    config = load_session_config(root / "session.cfg")
    assert config.mode == "manual" and config.fps == 10
    assert streams.presentation_size() == (320, 180)
    assert streams.screen_size("T1") == (400, 225)
    assert streams.screen_size("S_eng") == (256, 144)

    n_pres = sum(1 for _ in streams.presentation())
    assert n_pres == manifest["frames"]
    faces = list(streams.face("S_mob"))
    assert len(faces) == manifest["frames"]
    assert not any(r.face_detected for r in faces)  # mobile user off-camera
    assert all(r.face_detected for r in streams.face("S_eng"))


def test_engaged_face_stream_identical_to_instructor(mixed_session):
    """Same camera + same scripted head movement => bitwise-equal streams."""
    root, _ = mixed_session
    instructor = (root / "PT1" / "face.jsonl").read_bytes()
    engaged = (root / "PS_eng" / "face.jsonl").read_bytes()
    distracted = (root / "PS_dist" / "face.jsonl").read_bytes()
    assert instructor == engaged
    assert instructor != distracted


def test_auto_manifest_reflects_slide_schedule(auto_session):
    _, manifest = auto_session
    assert manifest["mode"] == "automatic"
    assert manifest["frames"] == 1000
    assert manifest["expected_segments"] == 4
    assert manifest["events_per_segment"] == 2
    starts = [s for s, _ in manifest["events"]]
    assert starts == [240, 320, 440, 520, 640, 720, 840, 920]


# ---------------------------------------------------------------------------
# Deck and trajectory primitives


def test_acceptance_deck_wants_slide_one_as_template():
    with pytest.raises(ValueError, match="number-free template"):
        acceptance_deck(insignificant=(2, 6))
    frames, insignificant = acceptance_deck(slides=4, insignificant=(3, 1))
    assert len(frames) == 4
    assert insignificant == [1, 3]
    assert np.array_equal(frames[0], frames[2])  # both render the bare template
    assert not np.array_equal(frames[0], frames[1])


def test_triangle_wave_period_and_range():
    fps = 10
    values = [triangle_wave(t, fps) for t in range(3 * fps)]
    assert all(-1.0 <= v <= 1.0 for v in values)
    assert values[:fps] == values[fps:2 * fps] == values[2 * fps:]
    assert triangle_wave(0, fps) == -1.0
    assert triangle_wave(fps // 2, fps) == 1.0
    # mirror symmetry about the peak
    assert triangle_wave(3, fps) == pytest.approx(triangle_wave(fps - 3, fps))


def test_face_records_carry_exact_projections():
    camera = CameraIntrinsics(640.0, 640.0, 320.0, 240.0)
    records = face_records(12, 10, camera, amplitude=5.0, depth=600.0, start_ts=7)
    assert [r.ts for r in records] == list(range(7, 19))
    for t, record in enumerate(records):
        assert record.face_detected
        assert record.landmarks.shape == (68, 2)
        tx = 5.0 * triangle_wave(t, 10)
        for slot, point in zip(CANDIDATE_LANDMARK_INDICES, DEFAULT_FACE_MODEL):
            expected = reference_project(
                np.zeros(3), np.array([tx, 0.0, 600.0]),
                camera.focal_x, camera.focal_y,
                camera.principal_x, camera.principal_y, point,
            )
            assert record.landmarks[slot - 1] == pytest.approx(expected, abs=1e-9)


def test_absent_faces_have_no_landmarks():
    camera = CameraIntrinsics(640.0, 640.0, 320.0, 240.0)
    records = face_records(5, 10, camera, present=False)
    assert all(not r.face_detected and r.landmarks is None for r in records)


# ---------------------------------------------------------------------------
# Calibration corpus


def test_calibration_corpus_layout(tmp_path):
    names = make_calibration_corpus(tmp_path, seed=0, frames=5)
    assert names == ["deck0", "deck1", "article", "video"]
    for name in names:
        for tag, size in (("a", (320, 180)), ("b", (480, 270))):
            directory = tmp_path / name / tag
            assert frame_dir_size(directory) == size
            frames = list(iter_frame_dir(directory))
            assert len(frames) == 5
            assert frames[0].pixels.shape == (size[1], size[0])
    # the two decks render genuinely different content
    deck0 = next(iter_frame_dir(tmp_path / "deck0" / "a")).pixels
    deck1 = next(iter_frame_dir(tmp_path / "deck1" / "a")).pixels
    assert not np.array_equal(deck0, deck1)
