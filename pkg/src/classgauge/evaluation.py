"""Verdict-versus-label metrics and the continuous-gaze baseline."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

ENGAGED = "engaged"
NON_ENGAGED = "non-engaged"
NOT_AVAILABLE = "na"

_PREDICTION_VALUES = frozenset({ENGAGED, NON_ENGAGED, NOT_AVAILABLE})
_LABEL_VALUES = frozenset({ENGAGED, NON_ENGAGED})


@dataclass(frozen=True)
class ConfusionCounts:
    true_positive: int
    false_positive: int
    true_negative: int
    false_negative: int

    @property
    def total(self) -> int:
        return (
            self.true_positive
            + self.false_positive
            + self.true_negative
            + self.false_negative
        )


def confusion(
    predictions: dict, labels: dict
) -> tuple[ConfusionCounts, int]:
    """Confusion counts with "engaged" as the positive class.

    ``predictions`` and ``labels`` map identical keys (typically
    ``(segment_index, student_id)``) to outcome strings. Predictions may be
    ``"na"`` (no countable events); those keys are excluded from the counts
    and returned separately.
    """
    if predictions.keys() != labels.keys():
        missing = sorted(map(str, labels.keys() - predictions.keys()))[:3]
        extra = sorted(map(str, predictions.keys() - labels.keys()))[:3]
        raise ValueError(
            f"prediction/label key mismatch (missing={missing}, extra={extra})"
        )
    tp = fp = tn = fn = excluded = 0
    for key, predicted in predictions.items():
        if predicted not in _PREDICTION_VALUES:
            raise ValueError(f"invalid prediction {predicted!r} for {key!r}")
        actual = labels[key]
        if actual not in _LABEL_VALUES:
            raise ValueError(f"invalid label {actual!r} for {key!r}")
        if predicted == NOT_AVAILABLE:
            excluded += 1
        elif predicted == ENGAGED and actual == ENGAGED:
            tp += 1
        elif predicted == ENGAGED:
            fp += 1
        elif actual == ENGAGED:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn), excluded


def specificity(counts: ConfusionCounts) -> float | None:
    """TN / (TN + FP); None when no actual negatives."""
    denominator = counts.true_negative + counts.false_positive
    if denominator == 0:
        return None
    return counts.true_negative / denominator


def npv(counts: ConfusionCounts) -> float | None:
    """TN / (TN + FN); None when nothing was predicted negative."""
    denominator = counts.true_negative + counts.false_negative
    if denominator == 0:
        return None
    return counts.true_negative / denominator


def f_beta(spec_value: float, npv_value: float, beta: float = 2.0) -> float:
    """Weighted harmonic mean of specificity and negative predictive value."""
    for name, value in (("specificity", spec_value), ("npv", npv_value)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be inside [0, 1], got {value}")
    if beta < 0:
        raise ValueError("beta must be non-negative")
    if spec_value == 0.0 and npv_value == 0.0:
        return 0.0
    b2 = beta * beta
    denominator = b2 * npv_value + spec_value
    if denominator == 0.0:
        return 0.0
    return (1.0 + b2) * npv_value * spec_value / denominator


def evaluate(predictions: dict, labels: dict, beta: float = 2.0) -> dict:
    """Summary metrics for a prediction/label pairing."""
    counts, excluded = confusion(predictions, labels)
    spec_value = specificity(counts)
    npv_value = npv(counts)
    score = None
    if spec_value is not None and npv_value is not None:
        score = f_beta(spec_value, npv_value, beta)
    return {
        "counts": {
            "true_positive": counts.true_positive,
            "false_positive": counts.false_positive,
            "true_negative": counts.true_negative,
            "false_negative": counts.false_negative,
            "excluded": excluded,
        },
        "specificity": spec_value,
        "npv": npv_value,
        "f_beta": score,
        "beta": beta,
    }


# ---------------------------------------------------------------------------
# Continuous-gaze baseline


def baseline_continuous_gaze(face_records, segments) -> dict[int, str]:
    """Reference scheme: a participant counts as engaged in a segment when
    their face is detected in strictly more than half of that segment's face
    frames. Segments without face frames fall to non-engaged.
    """
    verdicts: dict[int, str] = {}
    records = list(face_records)
    for index, segment in enumerate(segments):
        inside = [
            r for r in records if segment.start <= r.ts <= segment.end
        ]
        detected = sum(1 for r in inside if r.face_detected)
        engaged = bool(inside) and detected * 2 > len(inside)
        verdicts[index] = ENGAGED if engaged else NON_ENGAGED
    return verdicts


# ---------------------------------------------------------------------------
# File formats: one JSON object per line, keys segment/student + value field


def _load_outcomes(path, value_field: str, allowed: frozenset) -> dict:
    outcomes: dict = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{line_number}: invalid JSON ({exc})") from exc
        try:
            key = (int(record["segment"]), str(record["student"]))
            value = str(record[value_field])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(
                f"{path}:{line_number}: expected segment/student/{value_field}"
            ) from exc
        if value not in allowed:
            raise ValueError(
                f"{path}:{line_number}: invalid {value_field} {value!r}"
            )
        if key in outcomes:
            raise ValueError(f"{path}:{line_number}: duplicate entry for {key}")
        outcomes[key] = value
    return outcomes


def load_predictions(path) -> dict:
    return _load_outcomes(path, "prediction", _PREDICTION_VALUES)


def load_labels(path) -> dict:
    return _load_outcomes(path, "label", _LABEL_VALUES)


def predictions_from_scorecards(scorecards, threshold: float = 50.0) -> dict:
    """Binary engagement predictions from per-segment scores: a student is
    predicted engaged in a segment when their score is at least ``threshold``
    percent; segments with no countable events yield "na"."""
    predictions: dict = {}
    for card in scorecards:
        for student in card.students:
            if student.score is None:
                value = NOT_AVAILABLE
            elif student.score >= threshold:
                value = ENGAGED
            else:
                value = NON_ENGAGED
            predictions[(card.index, student.student_id)] = value
    return predictions
