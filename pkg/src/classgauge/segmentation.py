"""Scoring segments: automatic slide-transition detection over three
slide-number crop regions, or manual fixed time slices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Crop geometry: 30 rows x 50 columns, inset 5 px from the frame edges.
CROP_HEIGHT = 30
CROP_WIDTH = 50
CROP_INSET = 5
POSITIONS = ("upper-right", "lower-right", "middle-bottom")

MIN_FRAME_WIDTH = CROP_WIDTH + 2 * CROP_INSET  # 60
MIN_FRAME_HEIGHT = CROP_HEIGHT + 2 * CROP_INSET  # 40


@dataclass(frozen=True)
class Segment:
    start: int
    end: int  # inclusive
    significant: bool = True

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError("segment end precedes start")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def crop_origins(width: int, height: int) -> dict[str, tuple[int, int]]:
    """(row, col) origin of each 30x50 crop for a W x H frame."""
    if width < MIN_FRAME_WIDTH or height < MIN_FRAME_HEIGHT:
        raise ValueError(
            f"frame {width}x{height} too small for slide-number crops "
            f"(needs at least {MIN_FRAME_WIDTH}x{MIN_FRAME_HEIGHT})"
        )
    right = width - CROP_INSET - CROP_WIDTH
    bottom = height - CROP_INSET - CROP_HEIGHT
    centre = (width - CROP_WIDTH) // 2
    return {
        "upper-right": (CROP_INSET, right),
        "lower-right": (bottom, right),
        "middle-bottom": (bottom, centre),
    }


def crop_regions(frame: np.ndarray) -> dict[str, np.ndarray]:
    """The three 30x50 grayscale patches, keyed by position tag."""
    arr = np.asarray(frame)
    if arr.ndim != 2:
        raise ValueError("frame must be a 2-D grayscale matrix")
    height, width = arr.shape
    out = {}
    for tag, (row, col) in crop_origins(width, height).items():
        out[tag] = arr[row : row + CROP_HEIGHT, col : col + CROP_WIDTH]
    return out


def mse(patch_a: np.ndarray, patch_b: np.ndarray) -> float:
    """Mean squared intensity difference between two equal-shape patches."""
    a = np.asarray(patch_a, dtype=np.float64)
    b = np.asarray(patch_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


class SlideSegmenter:
    """Incremental slide-transition segmentation.

    Feed frames in timestamp order; a transition at frame t is declared when
    exactly the slide-number-bearing crop's MSE against the previous frame
    exceeds the threshold while the other two crops stay within it. The
    bearing position is unknown initially and is locked by the first frame
    pair in which exactly one position changes. Each new segment's first frame
    is compared (full frame) against the first-frame template; MSE <= threshold
    marks the segment insignificant (no slide number, e.g. title slides).
    """

    def __init__(self, threshold: float):
        if threshold <= 0:
            raise ValueError("threshold must be > 0")
        self.threshold = threshold
        self.template: np.ndarray | None = None
        self.locked_position: str | None = None
        self.segment_start: int | None = None
        self.segment_significant = False
        self.prev_ts: int | None = None
        self._prev_crops: dict[str, np.ndarray] | None = None

    def _significance(self, frame: np.ndarray) -> bool:
        return mse(frame, self.template) > self.threshold

    def feed(self, ts: int, frame: np.ndarray) -> Segment | None:
        """Advance one frame; returns the closed segment on a transition."""
        arr = np.asarray(frame)
        crops = crop_regions(arr)
        if self.template is None:
            self.template = arr.astype(np.float64).copy()
            self.segment_start = ts
            self.segment_significant = False  # template matches itself
            self.prev_ts = ts
            self._prev_crops = crops
            return None
        if self.prev_ts is not None and ts <= self.prev_ts:
            raise ValueError("timestamps must be strictly increasing")

        scores = {tag: mse(self._prev_crops[tag], crops[tag]) for tag in POSITIONS}
        changed = [tag for tag in POSITIONS if scores[tag] > self.threshold]
        if self.locked_position is None:
            is_transition = len(changed) == 1
            if is_transition:
                self.locked_position = changed[0]
        else:
            is_transition = changed == [self.locked_position]

        closed = None
        if is_transition:
            closed = Segment(self.segment_start, self.prev_ts, self.segment_significant)
            self.segment_start = ts
            self.segment_significant = self._significance(arr)
        self.prev_ts = ts
        self._prev_crops = crops
        return closed

    def finish(self) -> Segment | None:
        """Close the open segment at stream end."""
        if self.segment_start is None:
            return None
        seg = Segment(self.segment_start, self.prev_ts, self.segment_significant)
        self.segment_start = None
        return seg

    @property
    def open_segment_start(self) -> int | None:
        return self.segment_start


def detect_transitions(frames, threshold: float) -> list[Segment]:
    """Batch segmentation of an iterable of (ts, frame) pairs or frame records.

    A stream with no transitions yields a single segment.
    """
    seg = SlideSegmenter(threshold)
    out: list[Segment] = []
    fed = False
    for item in frames:
        ts, frame = (item.ts, item.pixels) if hasattr(item, "pixels") else item
        fed = True
        closed = seg.feed(ts, frame)
        if closed is not None:
            out.append(closed)
    if not fed:
        raise ValueError("empty frame stream")
    out.append(seg.finish())
    return out


def time_slice_segments(
    length: int, slice_minutes: int, fps: int, start_ts: int = 0
) -> list[Segment]:
    """Contiguous fixed slices over ``length`` frames starting at ``start_ts``.

    The final partial slice is kept when it spans at least 10% of a slice,
    otherwise it merges into the previous segment; a stream shorter than one
    slice is always a single segment.
    """
    if slice_minutes not in (3, 5, 15):
        raise ValueError("slice_minutes must be one of 3, 5, 15")
    if length < 1:
        raise ValueError("length must be >= 1")
    slice_frames = slice_minutes * 60 * fps
    segments = []
    full = length // slice_frames
    for k in range(full):
        segments.append(
            Segment(start_ts + k * slice_frames, start_ts + (k + 1) * slice_frames - 1)
        )
    remainder = length - full * slice_frames
    if remainder:
        tail_start = start_ts + full * slice_frames
        tail = Segment(tail_start, start_ts + length - 1)
        if not segments:
            segments.append(tail)
        elif remainder >= 0.1 * slice_frames:
            segments.append(tail)
        else:
            prev = segments.pop()
            segments.append(Segment(prev.start, tail.end, prev.significant))
    return segments
