"""Score feed service: Server-Sent Events over stdlib HTTP.

Subscribers receive a ``snapshot`` event (all scores so far) followed by live
``score`` events; reconnecting clients resume from ``Last-Event-ID`` (or an
``?after=`` query parameter) without replaying the snapshot. A ``POST
/command`` endpoint accepts segmentation-mode changes and acknowledges them
immediately even though they only take effect at the next segment boundary.

Every outbound event must pass :func:`validate_feed_event`, a strict
structural whitelist — exact key sets, enum strings, finite numbers, and
identifier-safe participant ids. Raw session data (frames, landmarks, paths)
has no representable shape here, so it cannot leak onto the wire.
"""

from __future__ import annotations

import json
import math
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlsplit

from .service import CommandError

__all__ = [
    "SchemaViolationError",
    "validate_feed_event",
    "FeedServer",
    "serve_feed",
]


class SchemaViolationError(ValueError):
    """An event does not match the published feed schema and was not sent."""


_ID_PATTERN = re.compile(r"^[A-Za-z0-9_-]{1,64}$")
_MODES = ("automatic", "manual")
_SLICES = (3, 5, 15)


def _fail(path: str, message: str) -> None:
    raise SchemaViolationError(f"{path}: {message}")


def _require_keys(obj, path: str, keys: tuple[str, ...]) -> None:
    if not isinstance(obj, dict):
        _fail(path, f"expected object, got {type(obj).__name__}")
    expected = set(keys)
    actual = set(obj)
    if actual != expected:
        missing = sorted(expected - actual)
        extra = sorted(actual - expected)
        parts = []
        if missing:
            parts.append(f"missing keys {missing}")
        if extra:
            parts.append(f"unexpected keys {extra}")
        _fail(path, "; ".join(parts))


def _check_int(value, path: str, minimum: int = 0) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        _fail(path, f"expected integer, got {type(value).__name__}")
    if value < minimum:
        _fail(path, f"must be >= {minimum}, got {value}")


def _check_number(value, path: str, lo: float | None = None, hi: float | None = None,
                  optional: bool = False) -> None:
    if value is None:
        if optional:
            return
        _fail(path, "must not be null")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected number, got {type(value).__name__}")
    if not math.isfinite(value):
        _fail(path, "must be finite")
    if lo is not None and value < lo:
        _fail(path, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        _fail(path, f"must be <= {hi}, got {value}")


def _check_mode_pair(mode, slice_minutes, path: str) -> None:
    if mode not in _MODES:
        _fail(f"{path}.mode", f"must be one of {list(_MODES)}")
    if slice_minutes is not None and slice_minutes not in _SLICES:
        _fail(f"{path}.slice_minutes", f"must be null or one of {list(_SLICES)}")
    if mode == "manual" and slice_minutes is None:
        _fail(f"{path}.slice_minutes", "required in manual mode")
    if mode == "automatic" and slice_minutes is not None:
        _fail(f"{path}.slice_minutes", "must be null in automatic mode")


def _validate_scorecard(card, path: str) -> None:
    _require_keys(card, path, ("segment", "students", "aggregate_score",
                               "presentation", "overall_score"))
    segment = card["segment"]
    _require_keys(segment, f"{path}.segment",
                  ("index", "start", "end", "mode", "slice_minutes", "significant"))
    _check_int(segment["index"], f"{path}.segment.index")
    _check_int(segment["start"], f"{path}.segment.start")
    _check_int(segment["end"], f"{path}.segment.end", minimum=segment["start"]
               if isinstance(segment["start"], int) else 0)
    _check_mode_pair(segment["mode"], segment["slice_minutes"], f"{path}.segment")
    if not isinstance(segment["significant"], bool):
        _fail(f"{path}.segment.significant", "expected boolean")

    students = card["students"]
    if not isinstance(students, list):
        _fail(f"{path}.students", "expected array")
    for i, student in enumerate(students):
        spath = f"{path}.students[{i}]"
        _require_keys(student, spath, ("id", "engaged_events", "counted_events",
                                       "score", "min_context_distance",
                                       "insufficient_events"))
        if not isinstance(student["id"], str) or not _ID_PATTERN.match(student["id"]):
            _fail(f"{spath}.id", "expected identifier string [A-Za-z0-9_-]{1,64}")
        _check_int(student["engaged_events"], f"{spath}.engaged_events")
        _check_int(student["counted_events"], f"{spath}.counted_events")
        _check_number(student["score"], f"{spath}.score", 0.0, 100.0, optional=True)
        _check_number(student["min_context_distance"],
                      f"{spath}.min_context_distance", 0.0, None, optional=True)
        _check_int(student["insufficient_events"], f"{spath}.insufficient_events")

    _check_number(card["aggregate_score"], f"{path}.aggregate_score", 0.0, 100.0,
                  optional=True)
    presentation = card["presentation"]
    _require_keys(presentation, f"{path}.presentation",
                  ("matched_events", "total_events", "score"))
    _check_int(presentation["matched_events"], f"{path}.presentation.matched_events")
    _check_int(presentation["total_events"], f"{path}.presentation.total_events")
    _check_number(presentation["score"], f"{path}.presentation.score", 0.0, 100.0,
                  optional=True)
    _check_number(card["overall_score"], f"{path}.overall_score", 0.0, 100.0,
                  optional=True)


def validate_feed_event(event) -> dict:
    """Check one outbound feed event against the schema whitelist.

    Returns the event unchanged; raises :class:`SchemaViolationError` naming
    the offending path otherwise.
    """
    if not isinstance(event, dict):
        _fail("$", f"expected object, got {type(event).__name__}")
    kind = event.get("type")
    if kind == "score":
        _require_keys(event, "$", ("type", "seq", "wall_ts", "mode",
                                   "slice_minutes", "dropped", "scorecard"))
        _check_int(event["seq"], "$.seq")
        _check_number(event["wall_ts"], "$.wall_ts")
        _check_mode_pair(event["mode"], event["slice_minutes"], "$")
        dropped = event["dropped"]
        _require_keys(dropped, "$.dropped", ("screen", "presentation", "face"))
        for key in ("screen", "presentation", "face"):
            _check_int(dropped[key], f"$.dropped.{key}")
        _validate_scorecard(event["scorecard"], "$.scorecard")
    elif kind == "end":
        _require_keys(event, "$", ("type", "seq", "wall_ts"))
        _check_int(event["seq"], "$.seq")
        _check_number(event["wall_ts"], "$.wall_ts")
    else:
        _fail("$.type", f"unknown event type {kind!r}")
    return event


# ---------------------------------------------------------------------------


class _StoredEvent:
    __slots__ = ("seq", "kind", "payload")

    def __init__(self, seq: int, kind: str, payload: str) -> None:
        self.seq = seq
        self.kind = kind
        self.payload = payload


class FeedServer:
    """Threaded SSE publisher with snapshot-then-tail delivery."""

    HEARTBEAT_SECONDS = 15.0

    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 command_handler=None) -> None:
        self._events: list[_StoredEvent] = []
        self._cond = threading.Condition()
        self._ended = False
        self._command_handler = command_handler
        self._thread: threading.Thread | None = None

        feed = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):  # keep stdout machine-readable
                pass

            def _cors(self) -> None:
                self.send_header("Access-Control-Allow-Origin", "*")

            def _send_json(self, status: int, obj: dict) -> None:
                body = json.dumps(obj, separators=(",", ":")).encode("utf-8")
                self.send_response(status)
                self._cors()
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_OPTIONS(self):
                self.send_response(204)
                self._cors()
                self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
                self.send_header("Access-Control-Allow-Headers",
                                 "Content-Type, Last-Event-ID")
                self.send_header("Content-Length", "0")
                self.end_headers()

            def do_GET(self):
                url = urlsplit(self.path)
                if url.path == "/feed":
                    self._serve_feed(url)
                elif url.path == "/state":
                    with feed._cond:
                        self._send_json(200, {
                            "last_seq": feed._events[-1].seq if feed._events else -1,
                            "events": len(feed._events),
                            "ended": feed._ended,
                        })
                else:
                    self._send_json(404, {"ok": False, "error": "not found"})

            def do_POST(self):
                url = urlsplit(self.path)
                if url.path != "/command":
                    self._send_json(404, {"ok": False, "error": "not found"})
                    return
                if feed._command_handler is None:
                    self._send_json(503, {"ok": False,
                                          "error": "no command handler attached"})
                    return
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    payload = json.loads(self.rfile.read(length) or b"{}")
                    if not isinstance(payload, dict):
                        raise CommandError("command body must be a JSON object")
                    extra = set(payload) - {"mode", "slice"}
                    if extra:
                        raise CommandError(f"unknown command keys {sorted(extra)}")
                    if "mode" not in payload:
                        raise CommandError("command requires a mode")
                    ack = feed._command_handler(payload["mode"], payload.get("slice"))
                except (json.JSONDecodeError, UnicodeDecodeError):
                    self._send_json(400, {"ok": False, "error": "invalid JSON body"})
                except CommandError as exc:
                    self._send_json(400, {"ok": False, "error": str(exc)})
                else:
                    self._send_json(200, ack)

            def _resume_point(self, url) -> int | None:
                header = self.headers.get("Last-Event-ID")
                if header is not None:
                    try:
                        return int(header)
                    except ValueError:
                        return None
                query = parse_qs(url.query)
                if "after" in query:
                    try:
                        return int(query["after"][0])
                    except (ValueError, IndexError):
                        return None
                return None

            def _write_event(self, stored: _StoredEvent) -> None:
                chunk = (f"event: {stored.kind}\nid: {stored.seq}\n"
                         f"data: {stored.payload}\n\n")
                self.wfile.write(chunk.encode("utf-8"))
                self.wfile.flush()

            def _serve_feed(self, url) -> None:
                after = self._resume_point(url)
                self.close_connection = True  # the stream ends with the socket
                self.send_response(200)
                self._cors()
                self.send_header("Content-Type", "text/event-stream; charset=utf-8")
                self.send_header("Cache-Control", "no-cache")
                self.send_header("Connection", "close")
                self.end_headers()
                try:
                    if after is None:
                        # snapshot covers score events only; a terminal "end"
                        # is always delivered as its own frame by the tail loop
                        with feed._cond:
                            snapshot = [s for s in feed._events if s.kind == "score"]
                            cursor = len(snapshot)
                        last_seq = snapshot[-1].seq if snapshot else -1
                        body = ('{"type":"snapshot","last_seq":%d,"events":[%s]}'
                                % (last_seq, ",".join(s.payload for s in snapshot)))
                        self._write_event(_StoredEvent(last_seq, "snapshot", body))
                    else:
                        with feed._cond:
                            cursor = 0
                            while (cursor < len(feed._events)
                                   and feed._events[cursor].seq <= after):
                                cursor += 1
                            backlog = list(feed._events[cursor:])
                        for stored in backlog:
                            self._write_event(stored)
                        cursor += len(backlog)
                    while True:
                        with feed._cond:
                            feed._cond.wait_for(
                                lambda: len(feed._events) > cursor or feed._ended,
                                timeout=FeedServer.HEARTBEAT_SECONDS,
                            )
                            fresh = list(feed._events[cursor:])
                            ended = feed._ended
                        for stored in fresh:
                            self._write_event(stored)
                        cursor += len(fresh)
                        if ended and not fresh:
                            return  # the terminal event has been delivered
                        if not fresh and not ended:
                            self.wfile.write(b": keep-alive\n\n")
                            self.wfile.flush()
                except (BrokenPipeError, ConnectionResetError):
                    return

        self._server = ThreadingHTTPServer((host, port), Handler)
        self._server.daemon_threads = True

    # -- publisher side -----------------------------------------------------

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        host = self._server.server_address[0]
        return f"http://{host}:{self.port}"

    def publish(self, event: dict) -> None:
        validate_feed_event(event)
        payload = json.dumps(event, separators=(",", ":"), allow_nan=False)
        with self._cond:
            if self._ended:
                raise RuntimeError("feed already ended")
            self._events.append(_StoredEvent(event["seq"], event["type"], payload))
            if event["type"] == "end":
                self._ended = True
            self._cond.notify_all()

    def end(self) -> None:
        with self._cond:
            if self._ended:
                return
            seq = self._events[-1].seq + 1 if self._events else 0
        self.publish({"type": "end", "seq": seq, "wall_ts": time.time()})

    def start(self) -> "FeedServer":
        if self._thread is not None:
            return self
        self._thread = threading.Thread(
            target=self._server.serve_forever, kwargs={"poll_interval": 0.1},
            daemon=True, name="classgauge-feed",
        )
        self._thread.start()
        return self

    def stop(self) -> None:
        with self._cond:
            self._ended = True
            self._cond.notify_all()
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None


def serve_feed(port: int = 0, host: str = "127.0.0.1",
               command_handler=None) -> FeedServer:
    """Bind and start a feed server; ``port=0`` picks a free port (read it
    back from ``server.port``)."""
    return FeedServer(host=host, port=port, command_handler=command_handler).start()
