"""Report rendering: delimited score tables plus engagement figures.

``write_report`` turns a list of segment scorecards into a CSV table (one row
per segment/student pair) and two PNG figures written next to it.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .scoring import SegmentScorecard

__all__ = ["write_score_table", "render_figures", "write_report"]

_COLUMNS = [
    "segment_index",
    "start",
    "end",
    "mode",
    "slice_minutes",
    "significant",
    "student_id",
    "engaged_events",
    "counted_events",
    "score",
    "min_context_distance",
    "insufficient_events",
    "aggregate_score",
    "presentation_matched",
    "presentation_total",
    "presentation_score",
    "overall_score",
]


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_score_table(scorecards: list[SegmentScorecard], path: str | Path) -> Path:
    """One CSV row per (segment, student); segment-level columns repeat."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for card in scorecards:
            base = [
                card.index, card.start, card.end, card.mode,
                card.slice_minutes, card.significant,
            ]
            tail = [
                card.aggregate, card.presentation_matched,
                card.presentation_total, card.presentation, card.overall,
            ]
            if card.students:
                for student in card.students:
                    writer.writerow([
                        _cell(v) for v in base + [
                            student.student_id, student.engaged_events,
                            student.counted_events, student.score,
                            student.min_context_distance,
                            student.insufficient_events,
                        ] + tail
                    ])
            else:
                writer.writerow([_cell(v) for v in base + [None] * 6 + tail])
    return path


def render_figures(scorecards: list[SegmentScorecard], out_dir: str | Path) -> list[Path]:
    """Render per-student engagement and presentation-score figures as PNGs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    indexes = [card.index for card in scorecards]
    paths: list[Path] = []

    student_ids: list[str] = []
    for card in scorecards:
        for student in card.students:
            if student.student_id not in student_ids:
                student_ids.append(student.student_id)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for sid in student_ids:
        ys = []
        for card in scorecards:
            match = next((s for s in card.students if s.student_id == sid), None)
            ys.append(float("nan") if match is None or match.score is None
                      else match.score)
        ax.plot(indexes, ys, marker="o", label=sid)
    aggregate = [float("nan") if card.aggregate is None else card.aggregate
                 for card in scorecards]
    if any(a == a for a in aggregate):
        ax.plot(indexes, aggregate, linestyle="--", color="black", label="aggregate")
    ax.set_xlabel("segment")
    ax.set_ylabel("engagement score")
    ax.set_ylim(-5, 105)
    ax.set_title("Per-student engagement by segment")
    if student_ids:
        ax.legend(loc="best", fontsize="small")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    engagement_path = out_dir / "engagement_scores.png"
    fig.savefig(engagement_path, dpi=120)
    plt.close(fig)
    paths.append(engagement_path)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    presentation = [float("nan") if card.presentation is None else card.presentation
                    for card in scorecards]
    overall = [float("nan") if card.overall is None else card.overall
               for card in scorecards]
    ax.bar(indexes, presentation, width=0.6, alpha=0.7,
           label="instructor presentation")
    ax.plot(indexes, overall, marker="s", color="darkred", label="overall engagement")
    ax.set_xlabel("segment")
    ax.set_ylabel("score")
    ax.set_ylim(0, 105)
    ax.set_title("Presentation score and running overall engagement")
    ax.legend(loc="best", fontsize="small")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    presentation_path = out_dir / "presentation_score.png"
    fig.savefig(presentation_path, dpi=120)
    plt.close(fig)
    paths.append(presentation_path)
    return paths


def write_report(scorecards: list[SegmentScorecard], out_dir: str | Path) -> dict:
    """Write the CSV table and figures; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = write_score_table(scorecards, out_dir / "scores.csv")
    figures = render_figures(scorecards, out_dir)
    return {"table": table, "figures": figures}
