"""Session orchestration: the incremental engagement engine, offline and live
runners, and the synthetic throughput benchmark.

The engine consumes per-timestamp ticks (presentation frame, screen frames,
face records), maintains every stream's state incrementally, and emits one
immutable scorecard per closed scoring segment as soon as the segment is
scoreable: the segment boundary is known, the event-match horizon has passed,
and every fixation run that could still contribute has closed. Offline and
live runners drive the same tick loop, which is what makes replays
byte-identical.
"""

from __future__ import annotations

import time
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .evaluation import predictions_from_scorecards
from .fixation import FixationEvent, StreamingRunDetector, ThresholdSet, match_student_event
from .foreground import GmmParams, foreground_count, gmm_init, gmm_update_classify, median_filter
from .gaze import (
    DegenerateGeometryError,
    ProjectionSample,
    cognitive_presence,
    gazing_energy,
    horizontal_series,
    project_point,
    select_candidate_landmarks,
    solve_pose,
    t_test_equal_mean,
)
from .ingest import (
    FaceFrameRecord,
    SessionConfig,
    SessionStreams,
    load_session_config,
    open_streams,
)
from .presence import build_scaled_histogram, min_pairwise_distance, visual_presence
from .scoring import (
    SegmentScorecard,
    canonical_json,
    classify_event,
    compute_segment_scores,
    presentation_score,
    scorecard_to_dict,
)
from .segmentation import SlideSegmenter


class CommandError(ValueError):
    """Rejected mode command; engine state is unchanged."""


VALID_COMMAND_MODES = ("automatic", "manual")


class _Series:
    """Timestamp-ordered value store with windowed lookup and front pruning."""

    __slots__ = ("ts", "values")

    def __init__(self) -> None:
        self.ts: list[int] = []
        self.values: list = []

    def append(self, ts: int, value) -> None:
        if self.ts and ts <= self.ts[-1]:
            raise ValueError("series timestamps must be strictly increasing")
        self.ts.append(ts)
        self.values.append(value)

    def window(self, start: int, end: int, limit: int | None = None) -> list:
        lo = bisect_left(self.ts, start)
        hi = bisect_right(self.ts, end)
        if limit is not None:
            hi = min(hi, lo + limit)
        return self.values[lo:hi]

    def prune(self, min_ts: int) -> None:
        lo = bisect_left(self.ts, min_ts)
        if lo:
            del self.ts[:lo]
            del self.values[:lo]


class _ScreenState:
    """Foreground model + run detector for one event-bearing stream."""

    def __init__(self, width: int, height: int, config: SessionConfig,
                 seed_frame: np.ndarray, source: str) -> None:
        params = GmmParams.from_config(config)
        self.model = gmm_init(width, height, params, seed_frame=seed_frame)
        self.thresholds = ThresholdSet.resolve(config, width, height)
        self.detector = StreamingRunDetector(self.thresholds, source)
        self.kernel = config.median_kernel
        self.source = source

    def feed(self, ts: int, frame: np.ndarray, debug=None) -> FixationEvent | None:
        mask = gmm_update_classify(self.model, frame)
        filtered = median_filter(mask.mask, self.kernel)
        if debug is not None:
            debug.mask(self.source, ts, filtered)
        return self.detector.feed(ts, foreground_count(filtered))


@dataclass(frozen=True)
class _PendingSegment:
    start: int
    end: int
    significant: bool
    mode: str
    slice_minutes: int | None


class DebugExporter:
    """Optional sink for intermediate pipeline artifacts, written as they are
    produced: fixation-event timelines, segment boundaries, gaze samples and
    per-event energy series (line-delimited records), and — when enabled —
    filtered foreground masks as portable bitmaps."""

    def __init__(self, out_dir: str | Path, masks: bool = False) -> None:
        import json as _json

        self._json = _json
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.masks_enabled = masks
        self._files = {
            "events": open(self.out_dir / "events.jsonl", "w", encoding="utf-8"),
            "segments": open(self.out_dir / "segments.jsonl", "w", encoding="utf-8"),
            "samples": open(self.out_dir / "gaze_samples.jsonl", "w", encoding="utf-8"),
            "energies": open(self.out_dir / "gaze_energies.jsonl", "w", encoding="utf-8"),
        }

    def _write(self, name: str, record: dict) -> None:
        self._files[name].write(
            self._json.dumps(record, separators=(",", ":")) + "\n"
        )

    def mask(self, source: str, ts: int, mask) -> None:
        if not self.masks_enabled:
            return
        from .foreground import write_pbm

        directory = self.out_dir / "masks" / source
        directory.mkdir(parents=True, exist_ok=True)
        write_pbm(directory / f"{ts:08d}.pbm", mask)

    def event(self, source: str, event: FixationEvent) -> None:
        self._write("events", {"source": source, "start": event.start, "end": event.end})

    def segment(self, start: int, end: int, significant: bool, mode: str) -> None:
        self._write("segments", {"start": start, "end": end,
                                 "significant": significant, "mode": mode})

    def sample(self, source: str, sample: ProjectionSample) -> None:
        self._write("samples", {"source": source, "ts": sample.ts, "x": sample.x})

    def energy(self, source: str, anchor: int, end: int, values: list[float]) -> None:
        self._write("energies", {"source": source, "start": anchor, "end": end,
                                 "energies": values})

    def close(self) -> None:
        for fh in self._files.values():
            fh.close()


class EngagementEngine:
    """Incremental scoring pipeline over tick-synchronised streams."""

    def __init__(self, config: SessionConfig, on_scorecard=None,
                 debug: DebugExporter | None = None) -> None:
        config.instructor  # raises when no instructor is declared
        self.config = config
        self._instructor = config.instructor.id
        self._students = [p.id for p in config.students]
        self._tolerance = config.event_match_tolerance_frames
        self._fps = config.fps
        self._on_scorecard = on_scorecard
        self._debug = debug

        self._mode = config.mode
        self._slice = config.slice_minutes
        self._pending_mode: tuple[str, int | None] | None = None
        self._anchor: int | None = None  # start of the open segment
        self._queue: list[_PendingSegment] = []

        self._pres: _ScreenState | None = None
        self._segmenter: SlideSegmenter | None = None
        self._screens: dict[str, _ScreenState] = {}
        self._screen_sizes: dict[str, tuple[int, int]] = {}
        self._presentation_size: tuple[int, int] | None = None

        self._hists: dict[str, _Series] = {"presentation": _Series()}
        self._faces: dict[str, _Series] = {}
        self._noses: dict[str, _Series] = {}
        for pid in [self._instructor, *self._students]:
            self._hists[f"screen:{pid}"] = _Series()
            self._faces[pid] = _Series()
            self._noses[pid] = _Series()

        self._pres_events: list[tuple[int, FixationEvent]] = []
        self._event_seq = 0
        self._student_events: dict[str, list[FixationEvent]] = {
            pid: [] for pid in self._students
        }

        self._intrinsics_cache: dict[str, object] = {}
        self._last_ts: int | None = None
        self._emit_index = 0
        self._overall_sum = 0.0
        self._overall_count = 0
        self.emitted: list[SegmentScorecard] = []

    # -- public surface ------------------------------------------------------

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def slice_minutes(self) -> int | None:
        return self._slice if self._mode == "manual" else None

    @property
    def last_ts(self) -> int | None:
        return self._last_ts

    def has_open_event(self) -> bool:
        """True while any fixation run is open on any stream."""
        if self._pres is not None and self._pres.detector.open_run_start is not None:
            return True
        return any(
            s.detector.open_run_start is not None for s in self._screens.values()
        )

    def apply_command(self, mode: str, slice_minutes: int | None = None) -> dict:
        """Queue a segmentation-mode change; it takes effect at the next
        segment boundary. Idempotent; invalid commands leave state unchanged."""
        if mode not in VALID_COMMAND_MODES:
            raise CommandError(f"mode must be one of {VALID_COMMAND_MODES}, got {mode!r}")
        if mode == "manual":
            if slice_minutes not in (3, 5, 15):
                raise CommandError("manual mode requires slice in {3, 5, 15}")
        else:
            if slice_minutes is not None:
                raise CommandError("automatic mode takes no slice length")
            slice_minutes = self._slice  # retained for a later manual switch
        requested = (mode, slice_minutes)
        active = (self._mode, self._slice)
        before = self._pending_mode
        self._pending_mode = None if requested == active else requested
        return {
            "ok": True,
            "mode": mode,
            "slice_minutes": slice_minutes if mode == "manual" else None,
            "applies": "next-boundary",
            "changed": self._pending_mode != before,
        }

    def tick(
        self,
        ts: int,
        presentation: np.ndarray | None = None,
        screens: dict[str, np.ndarray] | None = None,
        faces: dict[str, FaceFrameRecord] | None = None,
    ) -> None:
        """Ingest all frames that share one timestamp; gaps are allowed but
        timestamps must be strictly increasing."""
        if self._last_ts is not None and ts <= self._last_ts:
            raise ValueError(f"tick timestamps must increase (got {ts} after {self._last_ts})")
        if self._anchor is None:
            self._anchor = ts
        self._last_ts = ts

        if presentation is not None:
            self._ingest_presentation(ts, presentation)
        for pid, frame in (screens or {}).items():
            self._ingest_screen(ts, pid, frame)
        for pid, record in (faces or {}).items():
            self._ingest_face(ts, pid, record)

        self._close_manual_boundaries(ts)
        self._emit_ready(ts)

    def finish(self) -> list[SegmentScorecard]:
        """Close every open run and segment, score whatever remains, and
        return all scorecards emitted over the session."""
        if self._pres is not None:
            closed = self._pres.detector.finish()
            if closed is not None:
                self._record_presentation_event(closed)
        for pid, state in self._screens.items():
            closed = state.detector.finish()
            if closed is not None:
                self._record_student_event(pid, closed)

        if self._anchor is not None and self._last_ts is not None:
            if self._mode == "automatic":
                significant = True
                if self._segmenter is not None:
                    tail = self._segmenter.finish()
                    if tail is not None:
                        significant = tail.significant
                if self._anchor <= self._last_ts:
                    self._close_segment(self._last_ts, significant)
            else:
                self._close_manual_tail()
        self._emit_ready(force=True)
        return self.emitted

    # -- ingestion -----------------------------------------------------------

    def _ingest_presentation(self, ts: int, frame: np.ndarray) -> None:
        pixels = frame.pixels if hasattr(frame, "pixels") else frame
        if self._pres is None:
            height, width = pixels.shape
            self._presentation_size = (width, height)
            self._pres = _ScreenState(width, height, self.config, pixels, "presentation")
            self._segmenter = SlideSegmenter(self.config.transition_mse_threshold)
        closed_event = self._pres.feed(ts, pixels, debug=self._debug)
        if closed_event is not None:
            self._record_presentation_event(closed_event)
        self._hists["presentation"].append(
            ts, build_scaled_histogram(pixels, self.config.hist_bins)
        )
        closed_segment = self._segmenter.feed(ts, pixels)
        if closed_segment is not None and self._mode == "automatic":
            self._close_segment(closed_segment.end, closed_segment.significant)

    def _ingest_screen(self, ts: int, pid: str, frame: np.ndarray) -> None:
        pixels = frame.pixels if hasattr(frame, "pixels") else frame
        key = f"screen:{pid}"
        if key not in self._hists:
            raise ValueError(f"unknown participant {pid!r}")
        if pid not in self._screen_sizes:
            height, width = pixels.shape
            self._screen_sizes[pid] = (width, height)
        if pid in self._student_events:  # students carry their own event streams
            if pid not in self._screens:
                height, width = pixels.shape
                self._screens[pid] = _ScreenState(width, height, self.config, pixels, pid)
            closed = self._screens[pid].feed(ts, pixels, debug=self._debug)
            if closed is not None:
                self._record_student_event(pid, closed)
        self._hists[key].append(ts, build_scaled_histogram(pixels, self.config.hist_bins))

    def _ingest_face(self, ts: int, pid: str, record: FaceFrameRecord) -> None:
        if pid not in self._faces:
            raise ValueError(f"unknown participant {pid!r}")
        self._faces[pid].append(ts, bool(record.face_detected))
        if record.landmarks is None:
            return
        intrinsics = self._intrinsics(pid)
        if intrinsics is None:
            return
        try:
            points = select_candidate_landmarks(record.landmarks)
            pose = solve_pose(
                points,
                self.config.face_model,
                intrinsics,
                self.config.lm_lambda0,
                self.config.lm_max_iter,
                self.config.lm_tol,
            )
            nose = project_point(pose, intrinsics, self.config.face_model[4])
        except (DegenerateGeometryError, ValueError):
            return  # unusable landmark frame: no gaze sample at this ts
        sample = horizontal_series(
            [(ts, nose)],
            frame_width=int(round(2 * intrinsics.principal_x)),
            normalize=self.config.normalize_horizontal,
        )[0]
        self._noses[pid].append(ts, sample)
        if self._debug is not None:
            self._debug.sample(pid, sample)

    def _intrinsics(self, pid: str):
        if pid not in self._intrinsics_cache:
            size = self._screen_sizes.get(pid) or self._presentation_size
            if pid not in self.config.intrinsics and "*" not in self.config.intrinsics:
                if size is None:
                    return None  # nothing to derive defaults from yet
            self._intrinsics_cache[pid] = self.config.intrinsics_for(
                pid, size or (640, 480)
            )
        return self._intrinsics_cache[pid]

    # -- segment lifecycle ----------------------------------------------------

    def _slice_frames(self) -> int:
        return self._slice * 60 * self._fps

    def _close_manual_boundaries(self, ts: int) -> None:
        while (
            self._mode == "manual"
            and self._anchor is not None
            and ts >= self._anchor + self._slice_frames()
        ):
            self._close_segment(self._anchor + self._slice_frames() - 1, True)

    def _close_manual_tail(self) -> None:
        if self._anchor is None or self._last_ts is None or self._anchor > self._last_ts:
            return
        tail_len = self._last_ts - self._anchor + 1
        undersized = tail_len < 0.1 * self._slice_frames()
        if (
            undersized
            and self._queue
            and self._queue[-1].mode == "manual"
            and self._queue[-1].end == self._anchor - 1
        ):
            prev = self._queue.pop()
            self._queue.append(
                _PendingSegment(prev.start, self._last_ts, prev.significant,
                                prev.mode, prev.slice_minutes)
            )
            self._anchor = self._last_ts + 1
        else:
            self._close_segment(self._last_ts, True)

    def _record_presentation_event(self, event: FixationEvent) -> None:
        self._pres_events.append((self._event_seq, event))
        self._event_seq += 1
        if self._debug is not None:
            self._debug.event("presentation", event)

    def _record_student_event(self, pid: str, event: FixationEvent) -> None:
        self._student_events[pid].append(event)
        if self._debug is not None:
            self._debug.event(pid, event)

    def _close_segment(self, end: int, significant: bool) -> None:
        self._queue.append(
            _PendingSegment(
                self._anchor, end, significant, self._mode,
                self._slice if self._mode == "manual" else None,
            )
        )
        if self._debug is not None:
            self._debug.segment(self._anchor, end, significant, self._mode)
        self._anchor = end + 1
        if self._pending_mode is not None:
            self._mode, self._slice = self._pending_mode
            self._pending_mode = None

    def _emit_ready(self, now: int | None = None, force: bool = False) -> None:
        while self._queue:
            head = self._queue[0]
            if not force and not self._segment_ready(head, now):
                return
            self._queue.pop(0)
            self._score_segment(head)

    def _segment_ready(self, seg: _PendingSegment, now: int | None) -> bool:
        if now is None:
            return False
        if now <= seg.end + self._tolerance:
            return False
        if (
            seg.mode == "manual"
            and self._mode == "manual"
            and len(self._queue) == 1
            and now - seg.end < 0.1 * self._slice_frames()
        ):
            # the most recently closed slice may still have to absorb an
            # undersized session tail; hold it until a tail would stand alone
            return False
        if self._pres is not None:
            open_start = self._pres.detector.open_run_start
            if open_start is not None and open_start <= seg.end:
                return False
        # presentation events inside seg are now final; a student's open run
        # only matters if, once closed, its start could match one of them
        event_starts = [
            ev.start for _eid, ev in self._pres_events
            if seg.start <= ev.start <= seg.end
        ]
        for state in self._screens.values():
            open_start = state.detector.open_run_start
            if open_start is None or open_start > seg.end + self._tolerance:
                continue
            if any(abs(open_start - es) <= self._tolerance for es in event_starts):
                return False
        return True

    # -- scoring ----------------------------------------------------------------

    def _score_segment(self, seg: _PendingSegment) -> None:
        events = [
            (eid, ev)
            for eid, ev in self._pres_events
            if seg.start <= ev.start <= seg.end
        ]
        if seg.mode == "automatic" and not seg.significant:
            self._prune(seg.end)
            return  # insignificant slides are excluded from scoring

        instructor_flags = [self._instructor_contextual(ev) for _eid, ev in events]
        verdicts_by_student = {
            pid: [self._classify(eid, ev, pid) for eid, ev in events]
            for pid in self._students
        }
        students, aggregate = compute_segment_scores(instructor_flags, verdicts_by_student)
        if aggregate is not None:
            self._overall_sum += aggregate
            self._overall_count += 1
        overall = (
            self._overall_sum / self._overall_count if self._overall_count else None
        )
        scorecard = SegmentScorecard(
            index=self._emit_index,
            start=seg.start,
            end=seg.end,
            mode=seg.mode,
            slice_minutes=seg.slice_minutes,
            significant=seg.significant,
            students=tuple(students),
            aggregate=aggregate,
            presentation_matched=sum(1 for f in instructor_flags if f),
            presentation_total=len(instructor_flags),
            presentation=presentation_score(instructor_flags),
            overall=overall,
        )
        self._emit_index += 1
        self.emitted.append(scorecard)
        if self._on_scorecard is not None:
            self._on_scorecard(scorecard)
        self._prune(seg.end)

    def _instructor_contextual(self, event: FixationEvent) -> bool:
        n = self.config.hist_frames
        pres = self._hists["presentation"].window(event.start, event.end, n)
        screen = self._hists[f"screen:{self._instructor}"].window(event.start, event.end, n)
        if not pres or not screen:
            return False  # no shared evidence: the instructor is not sharing
        distance = min_pairwise_distance(
            pres, screen, one_sided=self.config.one_sided_chi_square
        )
        return distance <= self.config.hist_match_threshold

    def _classify(self, event_id: int, event: FixationEvent, pid: str):
        window = match_student_event(
            event, self._student_events[pid], self._tolerance, student_id=pid
        )
        n = self.config.hist_frames

        def visual() -> bool:
            flags = self._faces[pid].window(window.start, window.end)
            records = [FaceFrameRecord(0, flag, None) for flag in flags]
            return visual_presence(records, self.config.face_presence_fraction)

        def contextual() -> tuple[bool, float | None]:
            instructor = self._hists[f"screen:{self._instructor}"].window(
                event.start, event.end, n
            )
            student = self._hists[f"screen:{pid}"].window(window.start, window.end, n)
            if not instructor or not student:
                return False, None
            distance = min_pairwise_distance(
                instructor, student, one_sided=self.config.one_sided_chi_square
            )
            return distance <= self.config.hist_match_threshold, distance

        def cognitive() -> bool:
            instructor_samples = self._noses[self._instructor].window(event.start, event.end)
            student_samples = self._noses[pid].window(window.start, window.end)
            instructor_energy = gazing_energy(
                instructor_samples, self._fps, event.start, event.end
            )
            student_energy = gazing_energy(
                student_samples, self._fps, window.start, window.end
            )
            if self._debug is not None:
                self._debug.energy(self._instructor, event.start, event.end,
                                   instructor_energy)
                self._debug.energy(pid, window.start, window.end, student_energy)
            result = t_test_equal_mean(
                instructor_energy, student_energy, welch=self.config.welch_ttest
            )
            return cognitive_presence(result, self.config.significance_alpha)

        return classify_event(
            event_id, pid, visual, contextual, cognitive,
            insufficient_policy=self.config.insufficient_energy_policy,
        )

    def _prune(self, scored_end: int) -> None:
        horizon = scored_end + 1 - self._tolerance
        for series in self._hists.values():
            series.prune(horizon)
        for series in self._faces.values():
            series.prune(horizon)
        for series in self._noses.values():
            series.prune(horizon)
        self._pres_events = [
            (eid, ev) for eid, ev in self._pres_events if ev.start > scored_end
        ]
        for pid in self._student_events:
            self._student_events[pid] = [
                ev for ev in self._student_events[pid] if ev.start >= horizon
            ]


# ---------------------------------------------------------------------------
# Offline / live runners


def _merged_ticks(streams: SessionStreams, config: SessionConfig):
    """Merge every session stream into per-timestamp ticks
    (ts, presentation, screens, faces)."""
    participant_ids = [p.id for p in config.participants]
    sources: list[tuple[str, str | None, object]] = [
        ("presentation", None, streams.presentation())
    ]
    for pid in participant_ids:
        sources.append(("screen", pid, streams.screen(pid)))
        sources.append(("face", pid, streams.face(pid)))
    heads: list = [next(it, None) for _kind, _pid, it in sources]
    while True:
        live = [h.ts for h in heads if h is not None]
        if not live:
            return
        ts = min(live)
        presentation = None
        screens: dict[str, np.ndarray] = {}
        faces: dict[str, FaceFrameRecord] = {}
        for i, (kind, pid, iterator) in enumerate(sources):
            head = heads[i]
            if head is None or head.ts != ts:
                continue
            if kind == "presentation":
                presentation = head.pixels
            elif kind == "screen":
                screens[pid] = head.pixels
            else:
                faces[pid] = head
            heads[i] = next(iterator, None)
        yield ts, presentation, screens, faces


def write_scorecards(scorecards, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for card in scorecards:
            fh.write(canonical_json(card) + "\n")


def write_predictions(scorecards, path: str | Path, threshold: float = 50.0) -> None:
    import json as _json

    predictions = predictions_from_scorecards(scorecards, threshold)
    with open(path, "w", encoding="utf-8") as fh:
        for (segment, student), value in predictions.items():
            fh.write(
                _json.dumps(
                    {"segment": segment, "student": student, "prediction": value},
                    separators=(",", ":"),
                )
                + "\n"
            )


def run_offline(
    session_dir: str | Path,
    config: SessionConfig | None = None,
    out_dir: str | Path | None = None,
    on_scorecard=None,
    debug: DebugExporter | None = None,
) -> list[SegmentScorecard]:
    """Process a recorded session start-to-finish; optionally write
    ``scorecards.jsonl`` + ``predictions.jsonl`` under ``out_dir``."""
    session_dir = Path(session_dir)
    if config is None:
        config = load_session_config(session_dir / "session.cfg")
    streams = open_streams(session_dir, config)
    engine = EngagementEngine(config, on_scorecard=on_scorecard, debug=debug)
    try:
        for ts, presentation, screens, faces in _merged_ticks(streams, config):
            engine.tick(ts, presentation, screens, faces)
        scorecards = engine.finish()
    finally:
        if debug is not None:
            debug.close()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_scorecards(scorecards, out_dir / "scorecards.jsonl")
        write_predictions(scorecards, out_dir / "predictions.jsonl")
    return scorecards


@dataclass
class LiveRunResult:
    scorecards: list[SegmentScorecard]
    dropped: dict[str, int]
    engine: "EngagementEngine"


def build_score_event(
    seq: int,
    scorecard: SegmentScorecard,
    mode: str,
    slice_minutes: int | None,
    dropped: dict[str, int],
    wall_ts: float,
) -> dict:
    return {
        "type": "score",
        "seq": seq,
        "wall_ts": wall_ts,
        "mode": mode,
        "slice_minutes": slice_minutes,
        "dropped": {
            "screen": dropped.get("screen", 0),
            "presentation": dropped.get("presentation", 0),
            "face": dropped.get("face", 0),
        },
        "scorecard": scorecard_to_dict(scorecard),
    }


def run_live(
    session_dir: str | Path,
    config: SessionConfig | None = None,
    pace: float = 0.0,
    on_event=None,
    on_engine=None,
    engine_lock=None,
    clock=time.monotonic,
    sleep=time.sleep,
) -> LiveRunResult:
    """Replay a recorded session against the wall clock.

    ``pace`` is a real-time multiplier (0 disables pacing entirely: no sleeps,
    no drops — the deterministic replay mode). When paced and late, screen
    frames are dropped first, then presentation frames (never while a fixation
    run is open) and face frames (never while any fixation run is open), per
    the documented overload policy; drops are counted per stream kind.
    """
    session_dir = Path(session_dir)
    if config is None:
        config = load_session_config(session_dir / "session.cfg")
    streams = open_streams(session_dir, config)

    dropped = {"screen": 0, "presentation": 0, "face": 0}
    events: list[dict] = []
    seq = 0

    def emit(scorecard: SegmentScorecard) -> None:
        nonlocal seq
        event = build_score_event(
            seq, scorecard, engine.mode, engine.slice_minutes, dict(dropped), time.time()
        )
        seq += 1
        events.append(event)
        if on_event is not None:
            on_event(event)

    engine = EngagementEngine(config, on_scorecard=emit)
    if on_engine is not None:
        on_engine(engine)
    period = 0.0 if pace <= 0 else 1.0 / (config.fps * pace)
    origin_wall = clock()
    origin_ts: int | None = None

    for ts, presentation, screens, faces in _merged_ticks(streams, config):
        if origin_ts is None:
            origin_ts = ts
        lateness = 0.0
        if period > 0.0:
            deadline = origin_wall + (ts - origin_ts) * period
            now = clock()
            if now < deadline:
                sleep(deadline - now)
            else:
                lateness = now - deadline
        if period > 0.0 and lateness > 2 * period:
            if screens:
                dropped["screen"] += len(screens)
                screens = {}
            if lateness > 6 * period:
                if presentation is not None and not engine.has_open_event():
                    dropped["presentation"] += 1
                    presentation = None
                if faces and not engine.has_open_event():
                    dropped["face"] += len(faces)
                    faces = {}
        if engine_lock is not None:
            with engine_lock:
                engine.tick(ts, presentation, screens, faces)
        else:
            engine.tick(ts, presentation, screens, faces)
    if engine_lock is not None:
        with engine_lock:
            scorecards = engine.finish()
    else:
        scorecards = engine.finish()
    return LiveRunResult(scorecards, dropped, engine)


# ---------------------------------------------------------------------------
# Throughput benchmark


def run_benchmark(
    frames: int = 300,
    width: int = 640,
    height: int = 360,
    students: int = 4,
    fps: int = 30,
    warmup: int = 30,
) -> dict:
    """Synthetic live-load benchmark: one presentation + per-student screens +
    face streams at the reference resolution; reports mean/max tick time."""
    from .ingest import CameraIntrinsics, Participant
    from . import synth

    student_ids = [f"S{i}" for i in range(1, students + 1)]
    config = SessionConfig(
        fps=fps,
        mode="manual",
        slice_minutes=3,
        participants=[Participant("T", "instructor")]
        + [Participant(s, "student") for s in student_ids],
        intrinsics={"*": CameraIntrinsics(640.0, 640.0, 320.0, 240.0)},
    )
    engine = EngagementEngine(config)

    base = synth.render_slide(width, height, number=1, body=synth.plan_body(3))
    event_len = 4 * fps
    gap = 2 * fps
    windows = []
    start = 2 * fps
    while start + event_len < frames - 1:
        windows.append((start, start + event_len - 1))
        start += event_len + gap
    flicker = [
        synth.apply_flicker(base, width, height, phase) for phase in range(4)
    ]
    faces = synth.face_records(
        frames, fps, config.intrinsics["*"], amplitude=5.0, depth=600.0
    )

    def frame_at(t: int) -> np.ndarray:
        for s, e in windows:
            if s <= t <= e:
                return flicker[(t - s) % 4]
        return base

    timings = []
    for t in range(frames):
        frame = frame_at(t)
        screens = {pid: frame for pid in ["T", *student_ids]}
        face_map = {pid: faces[t] for pid in ["T", *student_ids]}
        t0 = time.perf_counter()
        engine.tick(t, frame, screens, face_map)
        timings.append(time.perf_counter() - t0)
    engine.finish()

    measured = timings[warmup:] if len(timings) > warmup else timings
    mean_ms = 1000.0 * sum(measured) / len(measured)
    max_ms = 1000.0 * max(measured)
    budget_ms = 1000.0 / fps
    return {
        "frames": frames,
        "width": width,
        "height": height,
        "students": students,
        "fps": fps,
        "mean_ms": mean_ms,
        "max_ms": max_ms,
        "budget_ms": budget_ms,
        "within_budget": mean_ms <= budget_ms,
    }
