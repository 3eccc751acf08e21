"""Command-line entry points.

Subcommands: ``run`` (offline scoring or live replay with an optional SSE
feed), ``evaluate`` (metrics from prediction/label files), ``calibrate-dh``
(screen-match threshold from a two-resolution corpus), ``bench`` (throughput),
and the synthetic data generators ``synth-session`` / ``synth-corpus``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import threading
import time
from pathlib import Path

from . import synth
from .evaluation import evaluate, load_labels, load_predictions
from .ingest import iter_frame_dir, load_session_config
from .presence import calibrate_match_threshold
from .scoring import canonical_json
from .service import (
    CommandError,
    DebugExporter,
    run_benchmark,
    run_live,
    run_offline,
    write_predictions,
    write_scorecards,
)


def _dump(obj: dict) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def _resolved_config(args) -> "object | None":
    """Apply --mode/--slice overrides on top of the session config."""
    config = load_session_config(Path(args.session) / "session.cfg")
    if args.mode is None and args.slice is None:
        return config
    updates = {}
    if args.mode is not None:
        updates["mode"] = "automatic" if args.mode == "auto" else "manual"
    if args.slice is not None:
        updates["slice_minutes"] = args.slice
        if args.mode is None:
            updates["mode"] = "manual"
    return dataclasses.replace(config, **updates)


def _cmd_run(args) -> int:
    session_dir = Path(args.session)
    config = _resolved_config(args)
    out_dir = Path(args.out) if args.out else None
    debug = None
    if args.debug_export:
        debug = DebugExporter(args.debug_export, masks=args.debug_masks)

    if args.serve is None:
        scorecards = run_offline(session_dir, config=config, out_dir=out_dir,
                                 debug=debug)
        dropped = None
    else:
        from .feed import serve_feed

        lock = threading.RLock()
        engine_box: list = []

        def handle_command(mode, slice_minutes):
            with lock:
                if not engine_box:
                    raise CommandError("engine not started yet")
                return engine_box[0].apply_command(mode, slice_minutes)

        server = serve_feed(port=args.serve, command_handler=handle_command)
        print(f"FEED_PORT={server.port}", flush=True)
        print(f"serving score feed on {server.url}/feed", flush=True)
        try:
            result = run_live(
                session_dir,
                config=config,
                pace=args.pace,
                on_event=server.publish,
                on_engine=lambda engine: engine_box.append(engine),
                engine_lock=lock,
            )
            scorecards = result.scorecards
            dropped = result.dropped
            server.end()
            if args.linger > 0:
                time.sleep(args.linger)
        finally:
            server.stop()
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_scorecards(scorecards, out_dir / "scorecards.jsonl")
            write_predictions(scorecards, out_dir / "predictions.jsonl")
        if debug is not None:
            debug.close()

    for card in scorecards:
        print(canonical_json(card))
    if dropped is not None and any(dropped.values()):
        print(f"dropped frames under load: {dropped}", file=sys.stderr)
    if out_dir is not None and args.report:
        from .report import write_report

        paths = write_report(scorecards, out_dir)
        print(f"report table: {paths['table']}", file=sys.stderr)
        for figure in paths["figures"]:
            print(f"report figure: {figure}", file=sys.stderr)
    return 0


def _cmd_evaluate(args) -> int:
    predictions = load_predictions(args.pred)
    labels = load_labels(args.labels)
    overall = evaluate(predictions, labels, beta=args.beta)
    report = {"overall": overall}
    students = sorted({student for _seg, student in labels})
    per_student = {}
    for student in students:
        sub_labels = {k: v for k, v in labels.items() if k[1] == student}
        sub_preds = {k: v for k, v in predictions.items() if k[1] == student}
        per_student[student] = evaluate(sub_preds, sub_labels, beta=args.beta)
    report["per_student"] = per_student
    _dump(report)
    return 0


def _cmd_calibrate(args) -> int:
    corpus_dir = Path(args.corpus)
    if not corpus_dir.is_dir():
        print(f"corpus directory not found: {corpus_dir}", file=sys.stderr)
        return 2
    corpus = {}
    for entry in sorted(corpus_dir.iterdir()):
        if not entry.is_dir():
            continue
        side_a, side_b = entry / "a", entry / "b"
        if not (side_a.is_dir() and side_b.is_dir()):
            print(f"skipping {entry.name}: needs a/ and b/ stream directories",
                  file=sys.stderr)
            continue
        corpus[entry.name] = (
            [rec.pixels for rec in iter_frame_dir(side_a)],
            [rec.pixels for rec in iter_frame_dir(side_b)],
        )
    result = calibrate_match_threshold(
        corpus, n=args.frames, bins=args.bins, one_sided=args.one_sided,
        default=args.default,
    )
    _dump(result)
    if not result["separable"]:
        print("matched and mismatched distances overlap: no usable threshold",
              file=sys.stderr)
        return 1
    return 0


def _cmd_bench(args) -> int:
    result = run_benchmark(
        frames=args.frames, width=args.width, height=args.height,
        students=args.students, fps=args.fps,
    )
    _dump(result)
    return 0


def _cmd_synth_session(args) -> int:
    manifest = synth.write_scenario_session(args.out, scenario=args.scenario,
                                            seed=args.seed)
    print(f"wrote scenario {manifest['scenario']!r} to {args.out}", file=sys.stderr)
    _dump(manifest)
    return 0


def _cmd_synth_corpus(args) -> int:
    synth.make_calibration_corpus(args.out, seed=args.seed, frames=args.frames)
    print(f"wrote calibration corpus to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="classgauge",
        description="Engagement analytics for recorded or live virtual-classroom sessions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="score a recorded session")
    run_p.add_argument("--session", required=True, help="session directory")
    run_p.add_argument("--mode", choices=["auto", "slice"],
                       help="override segmentation mode")
    run_p.add_argument("--slice", type=int, choices=[3, 5, 15],
                       help="time-slice length in minutes (implies --mode slice)")
    run_p.add_argument("--serve", type=int, metavar="PORT",
                       help="serve the live score feed (0 picks a free port)")
    run_p.add_argument("--pace", type=float, default=0.0,
                       help="real-time multiplier for live replay (0 = unpaced)")
    run_p.add_argument("--linger", type=float, default=3.0,
                       help="seconds to keep serving after the session ends")
    run_p.add_argument("--out", help="directory for scorecards.jsonl + predictions.jsonl")
    run_p.add_argument("--report", action="store_true",
                       help="render CSV table + figures into --out")
    run_p.add_argument("--debug-export", metavar="DIR",
                       help="write event/segment/gaze traces as JSONL")
    run_p.add_argument("--debug-masks", action="store_true",
                       help="also dump filtered foreground masks as PBM files")
    run_p.set_defaults(func=_cmd_run)

    eval_p = sub.add_parser("evaluate", help="score predictions against labels")
    eval_p.add_argument("--pred", required=True, help="predictions JSONL")
    eval_p.add_argument("--labels", required=True, help="labels JSONL")
    eval_p.add_argument("--beta", type=float, default=2.0)
    eval_p.set_defaults(func=_cmd_evaluate)

    cal_p = sub.add_parser("calibrate-dh",
                           help="derive the screen-match threshold from a corpus")
    cal_p.add_argument("--corpus", required=True,
                       help="directory of <name>/{a,b}/ stream pairs")
    cal_p.add_argument("--bins", type=int, default=32)
    cal_p.add_argument("--frames", type=int, default=5)
    cal_p.add_argument("--default", type=float, default=0.25)
    cal_p.add_argument("--one-sided", action="store_true")
    cal_p.set_defaults(func=_cmd_calibrate)

    bench_p = sub.add_parser("bench", help="synthetic throughput benchmark")
    bench_p.add_argument("--frames", type=int, default=300)
    bench_p.add_argument("--width", type=int, default=640)
    bench_p.add_argument("--height", type=int, default=360)
    bench_p.add_argument("--students", type=int, default=4)
    bench_p.add_argument("--fps", type=int, default=30)
    bench_p.set_defaults(func=_cmd_bench)

    synth_p = sub.add_parser("synth-session", help="generate a synthetic session")
    synth_p.add_argument("out", help="output session directory")
    synth_p.add_argument("--scenario", default="mixed",
                         choices=sorted(synth.SCENARIOS))
    synth_p.add_argument("--seed", type=int, default=0)
    synth_p.set_defaults(func=_cmd_synth_session)

    corpus_p = sub.add_parser("synth-corpus",
                              help="generate a threshold-calibration corpus")
    corpus_p.add_argument("out", help="output corpus directory")
    corpus_p.add_argument("--seed", type=int, default=0)
    corpus_p.add_argument("--frames", type=int, default=6)
    corpus_p.set_defaults(func=_cmd_synth_corpus)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
