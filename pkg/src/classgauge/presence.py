"""Visual presence (face on camera) and contextual presence (screen content
match via scaled intensity histograms and chi-square distance)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class HistogramDescriptor:
    """Scaled intensity histogram: ``bins`` equal-width bins over [0, 255]."""

    counts: np.ndarray  # (bins,) int64
    total: int

    @property
    def bins(self) -> int:
        return int(self.counts.shape[0])


@dataclass(frozen=True)
class PresenceVerdict:
    visual: bool
    contextual: bool
    min_distance: float | None  # present iff contextual was evaluated

    def __post_init__(self) -> None:
        if self.contextual and not self.visual:
            raise ValueError("cascade ordering violated: contextual implies visual")


def visual_presence(face_records, threshold: float = 0.5) -> bool:
    """True iff the fraction of records with a detected face is >= threshold.

    ``face_records`` is the face-stream slice covering one event window; gap
    frames are simply absent from it. An all-gap (empty) window is False.
    """
    total = 0
    detected = 0
    for rec in face_records:
        total += 1
        if rec.face_detected:
            detected += 1
    if total == 0:
        return False
    return detected / total >= threshold


def build_scaled_histogram(frame, bins: int) -> HistogramDescriptor:
    """counts[i] = number of pixels with floor(intensity * bins / 256) = i."""
    if bins < 1 or 256 % bins != 0:
        raise ValueError("bins must divide 256")
    pixels = frame.pixels if hasattr(frame, "pixels") else frame
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    factor = 256 // bins
    counts = np.bincount((arr // factor).ravel(), minlength=bins).astype(np.int64)
    return HistogramDescriptor(counts, int(counts.sum()))


def _normalised(h) -> np.ndarray:
    counts = h.counts if isinstance(h, HistogramDescriptor) else np.asarray(h)
    counts = counts.astype(np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("histogram has no mass")
    return counts / total


def chi_square_distance(hist_a, hist_b, one_sided: bool = False) -> float:
    """Chi-square distance between unit-normalised histograms.

    Symmetric form (default): sum over bins with pa+pb > 0 of
    (pa-pb)^2 / (pa+pb); bounded by 2. One-sided form: (pa-pb)^2 / pa over
    bins with pa > 0 (first histogram as reference).
    """
    pa = _normalised(hist_a)
    pb = _normalised(hist_b)
    if pa.shape != pb.shape:
        raise ValueError("histogram bin counts differ")
    if one_sided:
        nz = pa > 0
        d = pa[nz] - pb[nz]
        return float(np.sum(d * d / pa[nz]))
    s = pa + pb
    nz = s > 0
    d = pa[nz] - pb[nz]
    return float(np.sum(d * d / s[nz]))


def min_pairwise_distance(
    hists_a: list[HistogramDescriptor],
    hists_b: list[HistogramDescriptor],
    limit: int | None = None,
    one_sided: bool = False,
) -> float:
    """Minimum chi-square distance over index-paired histogram prefixes."""
    n = min(len(hists_a), len(hists_b))
    if limit is not None:
        n = min(n, limit)
    if n == 0:
        raise ValueError("no histogram pairs to compare")
    return min(chi_square_distance(hists_a[i], hists_b[i], one_sided) for i in range(n))


def contextual_presence(
    instructor_frames,
    student_frames,
    n: int,
    bins: int,
    threshold: float,
    one_sided: bool = False,
) -> tuple[bool, float]:
    """Compare the first n index-paired frames of the two matched event
    windows; present iff the minimum pairwise distance is within threshold.

    Fewer than n frames on a side simply uses what exists; empty input is an
    error (callers decide how to treat evidence-free windows).
    """
    instructor_frames = list(instructor_frames)
    student_frames = list(student_frames)
    if not instructor_frames or not student_frames:
        raise ValueError("both frame slices must be nonempty")
    ha = [build_scaled_histogram(f, bins) for f in instructor_frames[:n]]
    hb = [build_scaled_histogram(f, bins) for f in student_frames[:n]]
    dist = min_pairwise_distance(ha, hb, one_sided=one_sided)
    return dist <= threshold, dist


def calibrate_match_threshold(
    corpus: dict[str, tuple[list, list]],
    n: int = 5,
    bins: int = 32,
    one_sided: bool = False,
    default: float = 0.25,
) -> dict:
    """Derive a screen-match threshold from a two-resolution content corpus.

    ``corpus`` maps a content name to two frame sequences showing the *same*
    content at different capture resolutions. Same-name pairs must match
    (distance below threshold); cross-name pairs must not. The recommendation
    is the geometric mean of the tightest matched and mismatched distances;
    ``separable`` is False when no threshold can split them.
    """
    if len(corpus) < 2:
        raise ValueError("calibration needs at least two distinct content entries")
    hists: dict[str, tuple[list, list]] = {}
    for name, (frames_a, frames_b) in corpus.items():
        frames_a = list(frames_a)
        frames_b = list(frames_b)
        if not frames_a or not frames_b:
            raise ValueError(f"corpus entry {name!r} has an empty side")
        hists[name] = (
            [build_scaled_histogram(f, bins) for f in frames_a[:n]],
            [build_scaled_histogram(f, bins) for f in frames_b[:n]],
        )

    matched = {
        name: min_pairwise_distance(ha, hb, one_sided=one_sided)
        for name, (ha, hb) in hists.items()
    }
    mismatched = {}
    names = sorted(hists)
    for first in names:
        for second in names:
            if first == second:
                continue
            mismatched[f"{first}/{second}"] = min_pairwise_distance(
                hists[first][0], hists[second][1], one_sided=one_sided
            )

    max_matched = max(matched.values())
    min_mismatched = min(mismatched.values())
    separable = max_matched < min_mismatched
    recommended = (
        float(np.sqrt(max_matched * min_mismatched)) if separable and max_matched > 0
        else (min_mismatched / 2.0 if separable else None)
    )
    return {
        "matched": matched,
        "mismatched": mismatched,
        "max_matched": max_matched,
        "min_mismatched": min_mismatched,
        "separable": separable,
        "recommended": recommended,
        "default": default,
        "default_ok": separable and max_matched <= default < min_mismatched,
    }
