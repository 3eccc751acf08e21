"""Cascaded per-event verdicts and per-segment engagement scores."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from .gaze import InsufficientDataError


@dataclass(frozen=True)
class EventVerdict:
    """Outcome of the visual -> contextual -> cognitive cascade for one
    (event, student) pair. Stages after the first failed one hold None."""

    event_id: int
    student_id: str
    visual: bool
    contextual: bool | None
    cognitive: bool | None
    counted: bool = True
    min_context_distance: float | None = None
    insufficient_data: bool = False

    def __post_init__(self) -> None:
        if self.contextual is not None and not self.visual:
            raise ValueError("cascade violated: contextual evaluated after visual failure")
        if self.cognitive is not None and not self.contextual:
            raise ValueError("cascade violated: cognitive evaluated after contextual failure")

    @property
    def engaged(self) -> bool:
        return bool(self.visual and self.contextual and self.cognitive)


def classify_event(
    event_id: int,
    student_id: str,
    visual_fn: Callable[[], bool],
    contextual_fn: Callable[[], tuple[bool, float | None]],
    cognitive_fn: Callable[[], bool],
    insufficient_policy: str = "exclude",
) -> EventVerdict:
    """Run the three-stage cascade, short-circuiting on the first failure.

    The stage callables are only invoked when the previous stage passed, which
    is what enforces the cascade ordering (instrumentable by passing counting
    wrappers). A cognitive stage that raises :class:`InsufficientDataError`
    marks the verdict uncounted under the default policy, or non-engaged under
    ``insufficient_policy="non_engaged"``.
    """
    if insufficient_policy not in ("exclude", "non_engaged"):
        raise ValueError("insufficient_policy must be exclude|non_engaged")
    if not visual_fn():
        return EventVerdict(event_id, student_id, False, None, None)
    contextual, distance = contextual_fn()
    if not contextual:
        return EventVerdict(
            event_id, student_id, True, False, None, min_context_distance=distance
        )
    try:
        cognitive = bool(cognitive_fn())
    except InsufficientDataError:
        if insufficient_policy == "exclude":
            return EventVerdict(
                event_id, student_id, True, True, None,
                counted=False, min_context_distance=distance, insufficient_data=True,
            )
        return EventVerdict(
            event_id, student_id, True, True, False,
            min_context_distance=distance, insufficient_data=True,
        )
    return EventVerdict(
        event_id, student_id, True, True, cognitive, min_context_distance=distance
    )


def count_fixation_denominator(
    instructor_contextual: list[bool], verdicts: list[EventVerdict] | None = None
) -> int:
    """Countable events for one student in one segment: events where the
    instructor is contextually present, minus this student's uncounted ones."""
    if verdicts is None:
        return sum(1 for flag in instructor_contextual if flag)
    if len(verdicts) != len(instructor_contextual):
        raise ValueError("one verdict per event required")
    return sum(
        1
        for flag, verdict in zip(instructor_contextual, verdicts)
        if flag and verdict.counted
    )


def current_score(engaged_events: int, counted_events: int) -> float | None:
    """Percentage of counted events with full presence; None when nothing
    was countable."""
    if not 0 <= engaged_events:
        raise ValueError("engaged_events must be >= 0")
    if engaged_events > counted_events:
        raise ValueError("engaged_events cannot exceed counted_events")
    if counted_events == 0:
        return None
    return 100.0 * engaged_events / counted_events


def aggregate_score(scores) -> float | None:
    """Arithmetic mean of the available per-student scores (None excluded)."""
    present = [s for s in scores if s is not None]
    if not present:
        return None
    return sum(present) / len(present)


def presentation_score(instructor_contextual: list[bool]) -> float | None:
    """Percentage of the segment's events where the instructor was
    contextually present (denominator = all events in the segment)."""
    if not instructor_contextual:
        return None
    matched = sum(1 for flag in instructor_contextual if flag)
    return 100.0 * matched / len(instructor_contextual)


@dataclass(frozen=True)
class StudentSegmentScore:
    student_id: str
    engaged_events: int
    counted_events: int
    score: float | None
    min_context_distance: float | None = None
    insufficient_events: int = 0


@dataclass(frozen=True)
class SegmentScorecard:
    index: int
    start: int
    end: int
    mode: str  # "automatic" | "manual"
    slice_minutes: int | None
    significant: bool
    students: tuple[StudentSegmentScore, ...]
    aggregate: float | None
    presentation_matched: int
    presentation_total: int
    presentation: float | None
    overall: float | None  # running mean of segment aggregates so far


def compute_segment_scores(
    instructor_contextual: list[bool],
    verdicts_by_student: dict[str, list[EventVerdict]],
) -> tuple[list[StudentSegmentScore], float | None]:
    """Per-student scores and their aggregate for one segment.

    ``verdicts_by_student`` holds one verdict per segment event per student
    (aligned with ``instructor_contextual``).
    """
    students = []
    for student_id in verdicts_by_student:
        verdicts = verdicts_by_student[student_id]
        counted = count_fixation_denominator(instructor_contextual, verdicts)
        engaged = sum(
            1
            for flag, v in zip(instructor_contextual, verdicts)
            if flag and v.counted and v.engaged
        )
        distances = [
            v.min_context_distance for v in verdicts if v.min_context_distance is not None
        ]
        students.append(
            StudentSegmentScore(
                student_id=student_id,
                engaged_events=engaged,
                counted_events=counted,
                score=current_score(engaged, counted),
                min_context_distance=min(distances) if distances else None,
                insufficient_events=sum(1 for v in verdicts if v.insufficient_data),
            )
        )
    return students, aggregate_score(s.score for s in students)


# ---------------------------------------------------------------------------
# Canonical serialization (shared by scorecard files and the live feed, so
# offline and live runs can be compared byte-for-byte)


def scorecard_to_dict(sc: SegmentScorecard) -> dict:
    return {
        "segment": {
            "index": sc.index,
            "start": sc.start,
            "end": sc.end,
            "mode": sc.mode,
            "slice_minutes": sc.slice_minutes,
            "significant": sc.significant,
        },
        "students": [
            {
                "id": s.student_id,
                "engaged_events": s.engaged_events,
                "counted_events": s.counted_events,
                "score": s.score,
                "min_context_distance": s.min_context_distance,
                "insufficient_events": s.insufficient_events,
            }
            for s in sc.students
        ],
        "aggregate_score": sc.aggregate,
        "presentation": {
            "matched_events": sc.presentation_matched,
            "total_events": sc.presentation_total,
            "score": sc.presentation,
        },
        "overall_score": sc.overall,
    }


def canonical_json(sc: SegmentScorecard) -> str:
    """Deterministic single-line JSON for a scorecard."""
    return json.dumps(scorecard_to_dict(sc), separators=(",", ":"), allow_nan=False)
