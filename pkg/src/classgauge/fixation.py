"""Fixation target events: thresholded runs of foreground counts, plus
instructor/student event matching."""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class ThresholdSet:
    """Spatial band (pixel counts) and minimum duration (frames) for events."""

    lower: int
    upper: int
    min_frames: int

    def __post_init__(self) -> None:
        if not 0 < self.lower < self.upper:
            raise ValueError("require 0 < lower < upper")
        if self.min_frames < 1:
            raise ValueError("min_frames must be >= 1")

    @classmethod
    def resolve(cls, config, width: int, height: int) -> "ThresholdSet":
        """Resolve area fractions against a stream's W*H (round-half-even)."""
        area = width * height
        lower = max(1, round(config.fg_min_area_fraction * area))
        upper = min(area, round(config.fg_max_area_fraction * area))
        return cls(lower, upper, config.event_min_frames)


@dataclass(frozen=True)
class FixationEvent:
    start: int
    end: int  # inclusive
    source: str

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError("event end precedes start")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def detect_fixation_events(
    counts, thresholds: ThresholdSet, source: str = "presentation", start_ts: int = 0
) -> list[FixationEvent]:
    """Maximal runs of consecutive frames with lower <= count <= upper and
    length >= min_frames. ``counts`` is a dense per-frame series whose first
    entry has timestamp ``start_ts``; shorter runs are discarded entirely.
    """
    arr = np.asarray(counts)
    if arr.ndim != 1:
        raise ValueError("counts must be one-dimensional")
    if arr.size == 0:
        return []
    if arr.min() < 0:
        raise ValueError("counts must be nonnegative")
    qualifying = (arr >= thresholds.lower) & (arr <= thresholds.upper)
    padded = np.concatenate(([False], qualifying, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    starts, ends = edges[0::2], edges[1::2]  # end exclusive
    events = []
    for s, e in zip(starts, ends):
        if e - s >= thresholds.min_frames:
            events.append(FixationEvent(start_ts + int(s), start_ts + int(e) - 1, source))
    return events


def match_student_event(
    instructor_event: FixationEvent,
    student_events: list[FixationEvent],
    tolerance: int,
    student_id: str | None = None,
) -> FixationEvent:
    """The student event whose start is closest to the instructor event's
    start within +-tolerance (ties -> earlier). With no qualifying student
    event, the instructor's own window is reused on the student's timeline.
    """
    target = instructor_event.start
    best: FixationEvent | None = None
    best_dist = tolerance + 1
    # student_events are ordered by start; only the tolerance window matters.
    starts = [ev.start for ev in student_events]
    lo = bisect_left(starts, target - tolerance)
    for j in range(lo, len(student_events)):
        ev = student_events[j]
        if ev.start > target + tolerance:
            break
        dist = abs(ev.start - target)
        if dist < best_dist:  # scanning ascending starts settles ties -> earlier
            best, best_dist = ev, dist
    if best is not None:
        return best
    fallback = student_id if student_id is not None else instructor_event.source
    return replace(instructor_event, source=fallback)


class StreamingRunDetector:
    """Incremental run detection over (timestamp, count) samples.

    Feeding samples in increasing timestamp order yields the same events as
    :func:`detect_fixation_events` over the dense series; a timestamp gap
    breaks consecutiveness and therefore any open run.
    """

    def __init__(self, thresholds: ThresholdSet, source: str):
        self.thresholds = thresholds
        self.source = source
        self.run_start: int | None = None
        self.last_ts: int | None = None
        self.events: list[FixationEvent] = []

    def _close(self, end_ts: int) -> FixationEvent | None:
        if self.run_start is None:
            return None
        event = None
        if end_ts - self.run_start + 1 >= self.thresholds.min_frames:
            event = FixationEvent(self.run_start, end_ts, self.source)
            self.events.append(event)
        self.run_start = None
        return event

    def feed(self, ts: int, count: int) -> FixationEvent | None:
        """Advance by one sample; returns an event the moment its run closes."""
        if self.last_ts is not None and ts <= self.last_ts:
            raise ValueError("timestamps must be strictly increasing")
        closed = None
        if self.run_start is not None and ts != self.last_ts + 1:
            closed = self._close(self.last_ts)  # gap breaks the run
        if self.thresholds.lower <= count <= self.thresholds.upper:
            if self.run_start is None:
                self.run_start = ts
        elif self.run_start is not None:
            closed = self._close(self.last_ts)
        self.last_ts = ts
        return closed

    def finish(self) -> FixationEvent | None:
        """Close any run still open at stream end."""
        if self.last_ts is None:
            return None
        return self._close(self.last_ts)

    @property
    def open_run_start(self) -> int | None:
        return self.run_start
