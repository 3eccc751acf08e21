"""Deterministic synthetic classrooms with known ground truth.

Everything here is constructed so that pipeline outputs are exact by
construction, not statistically likely:

* Fixation targets are a rectangular region cycling through intensities
  (0, 128, 64, 192) per frame. Any two values observed within the mixture's
  memory differ by >= 64 intensity levels, which exceeds the widest possible
  match radius, so the region is foreground for exactly the scripted window;
  the 3x3 majority filter erodes the four corners, making every in-window
  count exactly ``area - 4``.
* Engaged students re-render the same deck at a different resolution with the
  same flicker schedule; all participants share one configured camera, so
  matched face trajectories are bitwise identical and the gaze-energy t-test
  degenerates to p=1 (identical) or p=0 (scaled trajectory) deterministically.
* Automatic-mode decks start with a number-free title slide (the template);
  content slides share one large static body whose appearance exceeds the
  upper foreground-area bound (the transition pulse never qualifies as an
  event) while consecutive slides differ only in the rendered slide number,
  which stays below the lower bound yet trips the crop MSE threshold.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .gaze import Pose, project_point
from .ingest import (
    CANDIDATE_LANDMARK_INDICES,
    DEFAULT_FACE_MODEL,
    CameraIntrinsics,
    FaceFrameRecord,
    write_face_stream,
    write_raw_stream,
    PRESENTATION_DIR,
)
from .segmentation import crop_origins, CROP_HEIGHT, CROP_WIDTH

# ---------------------------------------------------------------------------
# Slide rendering

FONT_5X7 = {
    "0": ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    "1": ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    "2": ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    "3": ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    "4": ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    "5": ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    "6": ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    "7": ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    "8": ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    "9": ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}

BASE_INTENSITY = 230
HEADER_INTENSITY = 140
DIGIT_INTENSITY = 20
FLICKER_CYCLE = (0, 128, 64, 192)

# Vertical layout bands (fractions of frame height), chosen to be mutually
# disjoint and clear of all three slide-number crop regions:
_HEADER_BAND = (0.06, 0.16)
_FLICKER_BAND = (0.30, 0.48)
_BODY_BAND_TOP = 0.52


def render_digits(canvas: np.ndarray, text: str, row: int, col: int,
                  scale: int = 3, ink: int = DIGIT_INTENSITY) -> None:
    """Draw decimal digits onto ``canvas`` in place, top-left at (row, col)."""
    c = col
    for ch in text:
        glyph = FONT_5X7[ch]
        for gr, bits in enumerate(glyph):
            for gc, bit in enumerate(bits):
                if bit == "1":
                    r0 = row + gr * scale
                    c0 = c + gc * scale
                    canvas[r0:r0 + scale, c0:c0 + scale] = ink
        c += 5 * scale + scale  # glyph width + one-cell gap


def _rows(frac_lo: float, frac_hi: float, size: int) -> tuple[int, int]:
    return int(frac_lo * size), int(frac_hi * size)


def plan_body(seed: int, blocks: int = 3) -> tuple[dict, ...]:
    """Random body blocks as frame-fraction rectangles (resolution-portable)."""
    rng = np.random.default_rng(seed)
    plans = []
    for _ in range(blocks):
        top = float(rng.uniform(_BODY_BAND_TOP, 0.68))
        height = float(rng.uniform(0.05, 0.10))
        left = float(rng.uniform(0.08, 0.45))
        width = float(rng.uniform(0.12, 0.30))
        value = int(rng.choice((25, 60, 95)))
        plans.append({"top": top, "height": height, "left": left,
                      "width": width, "value": value})
    return tuple(plans)


def _body_row_limit(height: int) -> int:
    # keep bodies clear of the bottom crop regions (5 px inset + 30 px crop)
    return height - CROP_HEIGHT - 11


def render_slide(
    width: int,
    height: int,
    number: int | None = None,
    body: tuple[dict, ...] = (),
    header_value: int = HEADER_INTENSITY,
    digit_scale: int = 3,
    number_position: str = "lower-right",
) -> np.ndarray:
    """Materialise one slide at a concrete resolution."""
    if width < 160 or height < 120:
        raise ValueError("slides render at 160x120 or larger")
    frame = np.full((height, width), BASE_INTENSITY, dtype=np.uint8)
    hr0, hr1 = _rows(*_HEADER_BAND, height)
    hc0, hc1 = int(0.08 * width), int(0.62 * width)
    frame[hr0:hr1, hc0:hc1] = header_value
    limit = _body_row_limit(height)
    for block in body:
        r0 = int(block["top"] * height)
        r1 = min(int((block["top"] + block["height"]) * height) + 1, limit)
        c0 = int(block["left"] * width)
        c1 = min(int((block["left"] + block["width"]) * width) + 1, width - CROP_WIDTH - 6)
        frame[r0:r1, c0:c1] = block["value"]
    if number is not None:
        origin = crop_origins(width, height)[number_position]
        render_digits(frame, str(number), origin[0] + 4, origin[1] + 4, digit_scale)
    return frame


BIG_BODY = (
    {"top": 0.50, "height": 0.27, "left": 0.05, "width": 0.78, "value": 60},
)


def flicker_bounds(width: int, height: int) -> tuple[int, int, int, int]:
    """Fixation-target rectangle (r0, r1, c0, c1), crop- and body-disjoint."""
    r0, r1 = _rows(*_FLICKER_BAND, height)
    return r0, r1, int(0.15 * width), int(0.33 * width)


def flicker_area(width: int, height: int) -> int:
    r0, r1, c0, c1 = flicker_bounds(width, height)
    return (r1 - r0) * (c1 - c0)


def apply_flicker(frame: np.ndarray, width: int, height: int, phase: int) -> np.ndarray:
    out = frame.copy()
    r0, r1, c0, c1 = flicker_bounds(width, height)
    out[r0:r1, c0:c1] = FLICKER_CYCLE[phase % len(FLICKER_CYCLE)]
    return out


def article_frame(width: int, height: int) -> np.ndarray:
    """Static white page with dark text lines (the reading-other-tab screen)."""
    frame = np.full((height, width), 255, dtype=np.uint8)
    line_height = max(2, int(0.02 * height))
    row = int(0.10 * height)
    c0, c1 = int(0.08 * width), int(0.90 * width)
    while row + line_height < int(0.88 * height):
        frame[row:row + line_height, c0:c1] = 30
        row += int(0.06 * height) + line_height
    return frame


def noise_frame(width: int, height: int, seed: int, index: int) -> np.ndarray:
    """One frame of seeded uniform noise (the video-other-tab screen)."""
    rng = np.random.default_rng((seed, index))
    return rng.integers(0, 256, size=(height, width), dtype=np.uint8)


def add_noise(frame: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    noisy = np.rint(frame.astype(np.float64) + rng.normal(0.0, sigma, frame.shape))
    return np.clip(noisy, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Decks

def acceptance_deck(
    width: int = 320,
    height: int = 180,
    slides: int = 10,
    insignificant: tuple[int, ...] = (1, 6),
    seed: int = 7,
) -> tuple[list[np.ndarray], list[int]]:
    """Deck for segmentation checks: numbered slides with per-slide bodies;
    ``insignificant`` slides (1-based) render as the bare number-free template.
    Returns (slides, 1-based indices of insignificant slides)."""
    if 1 not in insignificant:
        raise ValueError("slide 1 must be the number-free template")
    frames = []
    for i in range(1, slides + 1):
        if i in insignificant:
            frames.append(render_slide(width, height))
        else:
            frames.append(render_slide(width, height, number=i, body=plan_body(seed + i)))
    return frames, sorted(insignificant)


def auto_deck(width: int, height: int, content_slides: int) -> list[np.ndarray]:
    """Title template + ``content_slides`` slides sharing one large static
    body, differing only in the rendered number."""
    frames = [render_slide(width, height)]
    for i in range(1, content_slides + 1):
        frames.append(
            render_slide(width, height, number=i, body=BIG_BODY, header_value=120)
        )
    return frames


def hold_stream(slides: list[np.ndarray], hold: int) -> list[np.ndarray]:
    """Per-tick frame sequence: each slide held ``hold`` frames."""
    return [slides[t // hold] for t in range(len(slides) * hold)]


# ---------------------------------------------------------------------------
# Face trajectories

def triangle_wave(t: int, fps: int) -> float:
    """Symmetric triangle in [-1, 1], period exactly ``fps`` frames."""
    u = (t % fps) / fps
    return 1.0 - 4.0 * abs(u - 0.5)


def face_records(
    n_frames: int,
    fps: int,
    intrinsics: CameraIntrinsics,
    face_model: np.ndarray | None = None,
    amplitude: float = 5.0,
    depth: float = 600.0,
    present: bool = True,
    start_ts: int = 0,
) -> list[FaceFrameRecord]:
    """Head sweeping horizontally as a triangle wave of ``amplitude`` model
    units at fixed depth; landmarks are exact pinhole projections of the face
    model (non-candidate slots carry deterministic filler)."""
    model = DEFAULT_FACE_MODEL if face_model is None else face_model
    records = []
    filler = np.empty((68, 2), dtype=np.float64)
    for i in range(68):
        filler[i] = (
            intrinsics.principal_x + (i % 12 - 6) * 4.0,
            intrinsics.principal_y + (i // 12 - 3) * 5.0,
        )
    for t in range(n_frames):
        ts = start_ts + t
        if not present:
            records.append(FaceFrameRecord(ts, False, None))
            continue
        tx = amplitude * triangle_wave(t, fps)
        pose = Pose(np.zeros(3), np.array([tx, 0.0, depth]))
        lm = filler.copy()
        for slot, point in zip(CANDIDATE_LANDMARK_INDICES, model):
            lm[slot - 1] = project_point(pose, intrinsics, point)
        records.append(FaceFrameRecord(ts, True, lm))
    return records


# ---------------------------------------------------------------------------
# Scenario sessions

ENGAGED_BEHAVIOR = "engaged"
READING_BEHAVIOR = "reading"
VIDEO_BEHAVIOR = "video"
MOBILE_BEHAVIOR = "mobile"
DISTRACTED_BEHAVIOR = "distracted"

_BEHAVIOR_LABEL = {
    ENGAGED_BEHAVIOR: "engaged",
    READING_BEHAVIOR: "non-engaged",
    VIDEO_BEHAVIOR: "non-engaged",
    MOBILE_BEHAVIOR: "non-engaged",
    DISTRACTED_BEHAVIOR: "non-engaged",
}

_SCENARIO_STUDENTS = {
    "mixed": (
        ("S_eng", ENGAGED_BEHAVIOR),
        ("S_read", READING_BEHAVIOR),
        ("S_vid", VIDEO_BEHAVIOR),
        ("S_mob", MOBILE_BEHAVIOR),
        ("S_dist", DISTRACTED_BEHAVIOR),
    ),
    "engaged": (("S1", ENGAGED_BEHAVIOR),),
    "reading": (("S1", READING_BEHAVIOR),),
    "video": (("S1", VIDEO_BEHAVIOR),),
    "mobile": (("S1", MOBILE_BEHAVIOR),),
    "distracted": (("S1", DISTRACTED_BEHAVIOR),),
    "empty": (("S1", ENGAGED_BEHAVIOR),),
    "auto": (("S_eng", ENGAGED_BEHAVIOR), ("S_read", READING_BEHAVIOR)),
}

SCENARIOS = tuple(sorted(_SCENARIO_STUDENTS))

_PRESENTATION_SIZE = (320, 180)
_INSTRUCTOR_SCREEN_SIZE = (400, 225)
_STUDENT_SCREEN_SIZE = (256, 144)
_CAMERA = CameraIntrinsics(640.0, 640.0, 320.0, 240.0)
_DEPTH = 600.0
_FPS = 10
_EVENT_LEN = 4 * _FPS  # 4-second fixation windows


def _manual_event_starts(frames: int) -> list[int]:
    starts = [80, 200, 320, 440, 540]
    return [s for s in starts if s + _EVENT_LEN <= frames]


def _auto_event_starts(content_slides: int, hold: int) -> list[int]:
    starts = []
    for slide in range(1, content_slides + 1):  # slide 0 is the title
        base = slide * hold
        starts.extend((base + 40, base + 120))
    return starts


def _event_phase(events, t: int) -> int | None:
    for start, end in events:
        if start <= t <= end:
            return t - start
    return None


class _DeckRenderer:
    """Slide-index -> frame renderer with caching, one deck definition shared
    across every resolution it is materialised at."""

    def __init__(self, deck_kind: str, content_slides: int):
        self.deck_kind = deck_kind
        self.content_slides = content_slides
        self._cache: dict[tuple[int, int, int], np.ndarray] = {}

    def frame(self, size: tuple[int, int], slide_idx: int) -> np.ndarray:
        key = (size[0], size[1], slide_idx)
        if key not in self._cache:
            width, height = size
            if self.deck_kind == "auto":
                deck = auto_deck(width, height, self.content_slides)
            else:
                deck = [render_slide(width, height, number=1, body=plan_body(11))]
            self._cache[key] = deck[slide_idx]
        return self._cache[key]


def _deck_screen_stream(renderer: _DeckRenderer, size, schedule, events):
    width, height = size
    for t, slide_idx in enumerate(schedule):
        frame = renderer.frame(size, slide_idx)
        phase = _event_phase(events, t)
        yield apply_flicker(frame, width, height, phase) if phase is not None else frame


def _static_stream(frame: np.ndarray, n: int):
    return (frame for _ in range(n))


def _noise_stream(size, n: int, seed: int):
    width, height = size
    return (noise_frame(width, height, seed, t) for t in range(n))


def write_scenario_session(out_dir: str | Path, scenario: str = "mixed", seed: int = 0) -> dict:
    """Write a complete session directory plus ground truth.

    Returns the manifest (also stored as ``manifest.json``); ``labels.jsonl``
    holds per-(segment, student) ground-truth labels for the evaluate command.
    """
    if scenario not in _SCENARIO_STUDENTS:
        raise ValueError(f"unknown scenario {scenario!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    students = _SCENARIO_STUDENTS[scenario]
    if scenario == "auto":
        mode, slice_minutes = "automatic", 5
        content_slides, hold = 4, 200
        n_frames = (content_slides + 1) * hold
        schedule = [t // hold for t in range(n_frames)]
        event_starts = _auto_event_starts(content_slides, hold)
        renderer = _DeckRenderer("auto", content_slides)
        expected_segments = content_slides  # title segment is insignificant
        events_per_segment = 2
    else:
        mode, slice_minutes = "manual", 3
        n_frames = 240 if scenario == "empty" else 600
        schedule = [0] * n_frames
        event_starts = [] if scenario == "empty" else _manual_event_starts(n_frames)
        renderer = _DeckRenderer("single", 0)
        expected_segments = 1
        events_per_segment = len(event_starts)

    events = [(s, s + _EVENT_LEN - 1) for s in event_starts]

    # presentation stream (the fixation source)
    presentation_dir = out_dir / PRESENTATION_DIR
    presentation_dir.mkdir(parents=True, exist_ok=True)
    write_raw_stream(
        presentation_dir / "stream.raw",
        _deck_screen_stream(renderer, _PRESENTATION_SIZE, schedule, events),
        _FPS,
    )

    # instructor
    instructor_id = "T1"
    idir = out_dir / f"P{instructor_id}"
    (idir / "screen").mkdir(parents=True, exist_ok=True)
    write_raw_stream(
        idir / "screen" / "stream.raw",
        _deck_screen_stream(renderer, _INSTRUCTOR_SCREEN_SIZE, schedule, events),
        _FPS,
    )
    write_face_stream(
        idir / "face.jsonl",
        face_records(n_frames, _FPS, _CAMERA, amplitude=5.0, depth=_DEPTH),
    )

    labels = {}
    for sid, behavior in students:
        sdir = out_dir / f"P{sid}"
        (sdir / "screen").mkdir(parents=True, exist_ok=True)
        if behavior in (ENGAGED_BEHAVIOR, MOBILE_BEHAVIOR, DISTRACTED_BEHAVIOR):
            stream = _deck_screen_stream(renderer, _STUDENT_SCREEN_SIZE, schedule, events)
        elif behavior == READING_BEHAVIOR:
            stream = _static_stream(article_frame(*_STUDENT_SCREEN_SIZE), n_frames)
        else:  # video
            stream = _noise_stream(_STUDENT_SCREEN_SIZE, n_frames, seed + 101)
        write_raw_stream(sdir / "screen" / "stream.raw", stream, _FPS)
        amplitude = 15.0 if behavior == DISTRACTED_BEHAVIOR else 5.0
        write_face_stream(
            sdir / "face.jsonl",
            face_records(
                n_frames, _FPS, _CAMERA,
                amplitude=amplitude,
                depth=_DEPTH,
                present=behavior != MOBILE_BEHAVIOR,
            ),
        )
        labels[sid] = _BEHAVIOR_LABEL[behavior]

    student_ids = ", ".join(sid for sid, _ in students)
    config_text = (
        "[session]\n"
        f"fps = {_FPS}\n"
        f"mode = {mode}\n"
        f"slice_minutes = {slice_minutes}\n\n"
        "[participants]\n"
        f"instructor = {instructor_id}\n"
        f"students = {student_ids}\n\n"
        "[intrinsics]\n"
        f"focal_x = {_CAMERA.focal_x}\n"
        f"focal_y = {_CAMERA.focal_y}\n"
        f"principal_x = {_CAMERA.principal_x}\n"
        f"principal_y = {_CAMERA.principal_y}\n"
    )
    (out_dir / "session.cfg").write_text(config_text, encoding="utf-8")

    with open(out_dir / "labels.jsonl", "w", encoding="utf-8") as fh:
        for segment in range(expected_segments):
            for sid, _behavior in students:
                fh.write(json.dumps(
                    {"segment": segment, "student": sid, "label": labels[sid]},
                    separators=(",", ":"),
                ) + "\n")

    manifest = {
        "scenario": scenario,
        "fps": _FPS,
        "frames": n_frames,
        "mode": mode,
        "slice_minutes": slice_minutes,
        "events": [[s, e] for s, e in events],
        "expected_segments": expected_segments,
        "events_per_segment": events_per_segment,
        "instructor": instructor_id,
        "students": {sid: behavior for sid, behavior in students},
        "labels": labels,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return manifest


# ---------------------------------------------------------------------------
# Histogram-threshold calibration corpus

_CORPUS_RES_A = (320, 180)
_CORPUS_RES_B = (480, 270)


def make_calibration_corpus(out_dir: str | Path, seed: int = 0, frames: int = 6) -> list[str]:
    """Two-resolution renders of matched content under each name; streams under
    different names are content mismatches. Returns the written names."""
    out_dir = Path(out_dir)
    names = []
    contents: list[tuple[str, dict]] = [
        ("deck0", {"kind": "deck", "seed": seed + 1, "invert": False}),
        ("deck1", {"kind": "deck", "seed": seed + 2, "invert": True}),
        ("article", {"kind": "article"}),
        ("video", {"kind": "video", "seed": seed + 3}),
    ]
    for name, spec in contents:
        for tag, size in (("a", _CORPUS_RES_A), ("b", _CORPUS_RES_B)):
            directory = out_dir / name / tag
            directory.mkdir(parents=True, exist_ok=True)
            width, height = size
            if spec["kind"] == "deck":
                frame = render_slide(width, height, number=1, body=plan_body(spec["seed"]))
                if spec["invert"]:  # dark-theme deck: distinct content class
                    frame = (255 - frame).astype(frame.dtype)
                stream = (frame for _ in range(frames))
            elif spec["kind"] == "article":
                frame = article_frame(width, height)
                stream = (frame for _ in range(frames))
            else:
                stream = (noise_frame(width, height, spec["seed"], t) for t in range(frames))
            write_raw_stream(directory / "stream.raw", stream, _FPS)
        names.append(name)
    return names
