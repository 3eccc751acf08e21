"""Session loading: configuration, participant registry, frame and face streams.

A session lives in one directory::

    session.cfg            INI configuration (see docs/FORMATS.md)
    presentation/          canonical presentation frame stream (fixation source)
    P<id>/screen/          one screen-capture stream per participant
    P<id>/face.jsonl       one face/landmark stream per participant

Frame streams come either as one binary PGM per frame (``frame_<ts>.pgm``,
gaps allowed) or as a single packed file ``stream.raw`` with an ASCII
``W H fps`` header followed by dense row-major frames (timestamps implicitly
0..N-1).  Face streams are JSON lines ``{"ts": int, "face": bool,
"lm": [[x, y] * 68]?}``.
"""

from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

VALID_SLICES = (3, 5, 15)
VALID_MODES = ("automatic", "manual")
ID_PATTERN = re.compile(r"^[A-Za-z0-9_-]+$")

# Landmark slots (1-based, 68-point layout) consumed by the gaze stage:
# outer eye corners, lip corners, nose end, chin.
CANDIDATE_LANDMARK_INDICES = (37, 46, 49, 55, 31, 9)

# Rigid six-point face model (millimetres, face-local frame, nose at origin),
# rows ordered to match CANDIDATE_LANDMARK_INDICES.
DEFAULT_FACE_MODEL = np.array(
    [
        [-43.3, 32.7, -26.0],  # left eye outer corner
        [43.3, 32.7, -26.0],  # right eye outer corner
        [-28.9, -28.9, -24.1],  # left lip corner
        [28.9, -28.9, -24.1],  # right lip corner
        [0.0, 0.0, 0.0],  # nose end
        [0.0, -63.6, -12.5],  # chin
    ],
    dtype=np.float64,
)

FACE_MODEL_KEYS = ("left_eye", "right_eye", "left_lip", "right_lip", "nose", "chin")


class IngestError(Exception):
    """A session directory, stream, or record violates the documented format."""


class ConfigError(IngestError):
    """Configuration file failed to parse or violates an invariant."""


@dataclass(frozen=True)
class Participant:
    id: str
    role: str  # "instructor" | "student"


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_x: float
    focal_y: float
    principal_x: float
    principal_y: float

    def __post_init__(self) -> None:
        if not (self.focal_x > 0 and self.focal_y > 0):
            raise ConfigError("intrinsics: focal_x and focal_y must be > 0")
        for v in (self.focal_x, self.focal_y, self.principal_x, self.principal_y):
            if not math.isfinite(v):
                raise ConfigError("intrinsics: values must be finite")

    @classmethod
    def defaults_for(cls, width: int, height: int) -> "CameraIntrinsics":
        """Uncalibrated-camera approximation: focal = frame width, principal = centre."""
        return cls(float(width), float(width), width / 2.0, height / 2.0)

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.focal_x, 0.0, self.principal_x],
                [0.0, self.focal_y, self.principal_y],
                [0.0, 0.0, 1.0],
            ],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class ScreenFrameRecord:
    ts: int
    pixels: np.ndarray  # (H, W) uint8


@dataclass(frozen=True)
class FaceFrameRecord:
    ts: int
    face_detected: bool
    landmarks: np.ndarray | None  # (68, 2) float64 when present


@dataclass
class SessionConfig:
    """Every tunable of the pipeline, with conventional defaults.

    ``event_min_frames`` and ``event_match_tolerance_frames`` accept 0 meaning
    "derive from fps" (2 s and 3 s respectively), resolved in ``__post_init__``.
    """

    fps: int = 30
    mode: str = "automatic"
    slice_minutes: int = 5

    # Background model / foreground extraction
    gmm_components: int = 3
    gmm_learning_rate: float = 0.01
    gmm_background_fraction: float = 0.8
    gmm_match_sigmas: float = 2.5
    gmm_variance_init: float = 225.0
    gmm_variance_floor: float = 4.0
    median_kernel: int = 3

    # Fixation event thresholds (area bounds as fractions of W*H)
    fg_min_area_fraction: float = 0.005
    fg_max_area_fraction: float = 0.20
    event_min_frames: int = 0
    event_match_tolerance_frames: int = 0

    # Presence analysis
    hist_frames: int = 5
    hist_bins: int = 32
    hist_match_threshold: float = 0.25
    face_presence_fraction: float = 0.5
    one_sided_chi_square: bool = False

    # Slide segmentation
    transition_mse_threshold: float = 100.0

    # Gaze / statistics
    significance_alpha: float = 0.001
    normalize_horizontal: bool = True
    welch_ttest: bool = False
    insufficient_energy_policy: str = "exclude"  # exclude | non_engaged
    lm_lambda0: float = 1e-3
    lm_max_iter: int = 50
    lm_tol: float = 1e-10

    face_model: np.ndarray = field(default_factory=lambda: DEFAULT_FACE_MODEL.copy())
    intrinsics: dict[str, CameraIntrinsics] = field(default_factory=dict)
    participants: list[Participant] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.fps < 1:
            raise ConfigError("fps must be >= 1")
        if self.event_min_frames == 0:
            self.event_min_frames = 2 * self.fps
        if self.event_match_tolerance_frames == 0:
            self.event_match_tolerance_frames = 3 * self.fps
        self.validate()

    def validate(self) -> None:
        def positive(name: str) -> None:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")

        for name in (
            "gmm_learning_rate",
            "gmm_background_fraction",
            "gmm_match_sigmas",
            "gmm_variance_init",
            "gmm_variance_floor",
            "fg_min_area_fraction",
            "fg_max_area_fraction",
            "event_min_frames",
            "event_match_tolerance_frames",
            "hist_frames",
            "hist_bins",
            "hist_match_threshold",
            "face_presence_fraction",
            "transition_mse_threshold",
            "significance_alpha",
            "lm_lambda0",
            "lm_max_iter",
            "lm_tol",
        ):
            positive(name)

        if self.mode not in VALID_MODES:
            raise ConfigError(f"mode must be one of {VALID_MODES}, got {self.mode!r}")
        if self.slice_minutes not in VALID_SLICES:
            raise ConfigError(f"slice_minutes must be one of {VALID_SLICES}")
        if self.gmm_components < 1:
            raise ConfigError("gmm_components must be >= 1")
        if not 0.0 < self.gmm_learning_rate < 1.0:
            raise ConfigError("gmm_learning_rate must lie in (0, 1)")
        if not 0.0 < self.gmm_background_fraction <= 1.0:
            raise ConfigError("gmm_background_fraction must lie in (0, 1]")
        if not self.fg_min_area_fraction < self.fg_max_area_fraction:
            raise ConfigError("fg_min_area_fraction < fg_max_area_fraction violated")
        if self.fg_max_area_fraction > 1.0:
            raise ConfigError("fg_max_area_fraction must be <= 1")
        if self.median_kernel < 1 or self.median_kernel % 2 == 0:
            raise ConfigError("median_kernel must be odd and >= 1")
        if 256 % self.hist_bins != 0:
            raise ConfigError("hist_bins must divide 256")
        if not 0.0 < self.significance_alpha < 1.0:
            raise ConfigError("significance_alpha must lie in (0, 1)")
        if not 0.0 < self.face_presence_fraction <= 1.0:
            raise ConfigError("face_presence_fraction must lie in (0, 1]")
        if self.insufficient_energy_policy not in ("exclude", "non_engaged"):
            raise ConfigError("insufficient_energy_policy must be exclude|non_engaged")

        fm = np.asarray(self.face_model, dtype=np.float64)
        if fm.shape != (6, 3):
            raise ConfigError("face_model must contain six 3-D points")
        if len(np.unique(fm, axis=0)) != 6:
            raise ConfigError("face_model points must be pairwise distinct")
        # Non-coplanarity: rank of centred points must be 3.
        if np.linalg.matrix_rank(fm - fm.mean(axis=0), tol=1e-9) < 3:
            raise ConfigError("face_model points must not be coplanar")
        self.face_model = fm

        roles = [p.role for p in self.participants]
        ids = [p.id for p in self.participants]
        if self.participants:
            if roles.count("instructor") != 1:
                raise ConfigError("exactly one participant must have role=instructor")
            if len(set(ids)) != len(ids):
                raise ConfigError("participant ids must be unique")
        for pid in ids:
            if not ID_PATTERN.match(pid):
                raise ConfigError(f"participant id {pid!r} is not a valid token")

    # Convenience accessors -------------------------------------------------

    @property
    def instructor(self) -> Participant:
        for p in self.participants:
            if p.role == "instructor":
                return p
        raise ConfigError("no instructor declared")

    @property
    def students(self) -> list[Participant]:
        return [p for p in self.participants if p.role == "student"]

    def intrinsics_for(self, participant_id: str, frame_size: tuple[int, int]) -> CameraIntrinsics:
        """Configured intrinsics for a participant, or the frame-size default."""
        got = self.intrinsics.get(participant_id) or self.intrinsics.get("*")
        if got is not None:
            return got
        width, height = frame_size
        return CameraIntrinsics.defaults_for(width, height)


# ---------------------------------------------------------------------------
# Configuration file parsing


_BOOL_VALUES = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}

_INT_KEYS = {
    "fps",
    "slice_minutes",
    "gmm_components",
    "median_kernel",
    "event_min_frames",
    "event_match_tolerance_frames",
    "hist_frames",
    "hist_bins",
    "lm_max_iter",
}
_FLOAT_KEYS = {
    "gmm_learning_rate",
    "gmm_background_fraction",
    "gmm_match_sigmas",
    "gmm_variance_init",
    "gmm_variance_floor",
    "fg_min_area_fraction",
    "fg_max_area_fraction",
    "hist_match_threshold",
    "face_presence_fraction",
    "transition_mse_threshold",
    "significance_alpha",
    "lm_lambda0",
    "lm_tol",
}
_BOOL_KEYS = {"one_sided_chi_square", "normalize_horizontal", "welch_ttest"}
_STR_KEYS = {"mode", "insufficient_energy_policy"}

_SECTION_KEYS = {
    "session": {"fps", "mode", "slice_minutes"},
    "thresholds": {
        "fg_min_area_fraction",
        "fg_max_area_fraction",
        "event_min_frames",
        "event_match_tolerance_frames",
        "hist_frames",
        "hist_bins",
        "hist_match_threshold",
        "face_presence_fraction",
        "transition_mse_threshold",
        "significance_alpha",
    },
    "gmm": {
        "gmm_components",
        "gmm_learning_rate",
        "gmm_background_fraction",
        "gmm_match_sigmas",
        "gmm_variance_init",
        "gmm_variance_floor",
        "median_kernel",
    },
    "pose": {
        "lm_lambda0",
        "lm_max_iter",
        "lm_tol",
        "normalize_horizontal",
        "welch_ttest",
        "one_sided_chi_square",
        "insufficient_energy_policy",
    },
}


def _parse_value(key: str, raw: str) -> object:
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            return _BOOL_VALUES[raw.lower()]
        return raw
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r}") from exc


def load_session_config(path: str | Path) -> SessionConfig:
    """Parse ``session.cfg``; unspecified fields take the documented defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with path.open() as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    kwargs: dict[str, object] = {}
    intrinsics: dict[str, CameraIntrinsics] = {}
    face_model: np.ndarray | None = None
    participants: list[Participant] = []

    for section in cp.sections():
        if section in _SECTION_KEYS:
            allowed = _SECTION_KEYS[section]
            for key, raw in cp.items(section):
                if key not in allowed:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                kwargs[key] = _parse_value(key, raw)
        elif section == "participants":
            for key, raw in cp.items(section):
                if key == "instructor":
                    participants.append(Participant(raw.strip(), "instructor"))
                elif key == "students":
                    for tok in raw.split(","):
                        tok = tok.strip()
                        if tok:
                            participants.append(Participant(tok, "student"))
                else:
                    raise ConfigError(f"unknown key {key!r} in section [participants]")
        elif section == "face_model":
            rows = []
            for key in FACE_MODEL_KEYS:
                if not cp.has_option(section, key):
                    raise ConfigError(f"face_model section must define {key}")
                parts = [p for p in re.split(r"[,\s]+", cp.get(section, key).strip()) if p]
                if len(parts) != 3:
                    raise ConfigError(f"face_model {key} must have three coordinates")
                rows.append([float(p) for p in parts])
            face_model = np.array(rows, dtype=np.float64)
        elif section == "intrinsics" or section.startswith("intrinsics."):
            pid = "*" if section == "intrinsics" else section.split(".", 1)[1]
            vals = {}
            for key, raw in cp.items(section):
                if key not in ("focal_x", "focal_y", "principal_x", "principal_y"):
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                vals[key] = float(raw)
            missing = {"focal_x", "focal_y", "principal_x", "principal_y"} - set(vals)
            if missing:
                raise ConfigError(f"[{section}] missing {sorted(missing)}")
            intrinsics[pid] = CameraIntrinsics(**vals)
        else:
            raise ConfigError(f"unknown section [{section}]")

    if face_model is not None:
        kwargs["face_model"] = face_model
    if intrinsics:
        kwargs["intrinsics"] = intrinsics
    if participants:
        kwargs["participants"] = participants
    return SessionConfig(**kwargs)


# ---------------------------------------------------------------------------
# Pixel utilities


def grayscale_convert(rgb: np.ndarray) -> np.ndarray:
    """Luma conversion: round(0.299 R + 0.587 G + 0.114 B), half-to-even ties.

    Accepts any shape ending in a 3-channel axis; returns uint8 of the leading
    shape. Monotone in each channel.
    """
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.shape[-1] != 3:
        raise ValueError("expected trailing RGB axis of size 3")
    if arr.min() < 0 or arr.max() > 255:
        raise ValueError("channel values must lie in [0, 255]")
    y = 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# PGM / packed-raw frame IO


def write_pgm(path: str | Path, pixels: np.ndarray) -> None:
    arr = np.ascontiguousarray(pixels, dtype=np.uint8)
    if arr.ndim != 2:
        raise ValueError("PGM frames must be 2-D")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed; pixel data starts after the single whitespace
    # byte following maxval.
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise IngestError(f"truncated PGM header: {path}")
        ch = data[pos : pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl == -1 else nl + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    pos += 1  # single whitespace after maxval
    magic, w_s, h_s, maxval_s = tokens
    if magic != b"P5":
        raise IngestError(f"unsupported PGM magic {magic!r} (binary P5 required): {path}")
    try:
        w, h, maxval = int(w_s), int(h_s), int(maxval_s)
    except ValueError as exc:
        raise IngestError(f"corrupt PGM header: {path}") from exc
    if maxval != 255:
        raise IngestError(f"PGM maxval must be 255, got {maxval}: {path}")
    body = data[pos : pos + w * h]
    if len(body) != w * h:
        raise IngestError(f"corrupt PGM frame (expected {w * h} bytes): {path}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)


RAW_STREAM_NAME = "stream.raw"
_FRAME_NAME = re.compile(r"^frame_(\d+)\.pgm$")


def write_raw_stream(path: str | Path, frames, fps: int) -> None:
    """Write a dense packed stream; timestamps are implicitly 0..N-1."""
    path = Path(path)
    shape: tuple[int, int] | None = None
    with open(path, "wb") as fh:
        header_done = False
        for frame in frames:
            arr = np.ascontiguousarray(frame, dtype=np.uint8)
            if not header_done:
                shape = arr.shape
                h, w = shape
                fh.write(f"{w} {h} {fps}\n".encode("ascii"))
                header_done = True
            elif arr.shape != shape:
                raise ValueError("all frames in a raw stream must share one shape")
            fh.write(arr.tobytes())
        if not header_done:
            raise ValueError("cannot write an empty raw stream")


def _iter_raw_stream(path: Path) -> Iterator[ScreenFrameRecord]:
    with open(path, "rb") as fh:
        header = fh.readline()
        try:
            w, h, _fps = (int(tok) for tok in header.split())
        except ValueError as exc:
            raise IngestError(f"corrupt raw stream header: {path}") from exc
        frame_bytes = w * h
        ts = 0
        while True:
            chunk = fh.read(frame_bytes)
            if not chunk:
                return
            if len(chunk) != frame_bytes:
                raise IngestError(f"corrupt raw stream (truncated frame {ts}): {path}")
            yield ScreenFrameRecord(ts, np.frombuffer(chunk, dtype=np.uint8).reshape(h, w))
            ts += 1


def raw_stream_fps(path: str | Path) -> int:
    with open(path, "rb") as fh:
        header = fh.readline()
    try:
        _w, _h, fps = (int(tok) for tok in header.split())
    except ValueError as exc:
        raise IngestError(f"corrupt raw stream header: {path}") from exc
    return fps


def iter_frame_dir(directory: str | Path) -> Iterator[ScreenFrameRecord]:
    """Yield timestamp-ordered frames from a stream directory.

    Prefers ``stream.raw`` when present, else per-frame PGM files. Frames must
    share one shape; timestamps must be strictly increasing.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestError(f"stream directory not found: {directory}")
    raw = directory / RAW_STREAM_NAME
    shape: tuple[int, int] | None = None
    last_ts = -1
    if raw.is_file():
        source: Iterator[ScreenFrameRecord] = _iter_raw_stream(raw)
    else:
        entries = []
        for p in directory.iterdir():
            m = _FRAME_NAME.match(p.name)
            if m:
                entries.append((int(m.group(1)), p))
        if not entries:
            raise IngestError(f"no frames (stream.raw or frame_<ts>.pgm) in: {directory}")
        entries.sort()
        source = (ScreenFrameRecord(ts, read_pgm(p)) for ts, p in entries)
    for rec in source:
        if rec.ts <= last_ts:
            raise IngestError(f"out-of-order timestamp {rec.ts} in stream: {directory}")
        if shape is None:
            shape = rec.pixels.shape
        elif rec.pixels.shape != shape:
            raise IngestError(f"frame shape changed mid-stream at ts {rec.ts}: {directory}")
        last_ts = rec.ts
        yield rec


def frame_dir_size(directory: str | Path) -> tuple[int, int]:
    """(width, height) of a stream directory's frames without reading them all."""
    directory = Path(directory)
    raw = directory / RAW_STREAM_NAME
    if raw.is_file():
        with open(raw, "rb") as fh:
            w, h, _ = (int(tok) for tok in fh.readline().split())
        return w, h
    for rec in iter_frame_dir(directory):
        hh, ww = rec.pixels.shape
        return ww, hh
    raise IngestError(f"empty stream directory: {directory}")


# ---------------------------------------------------------------------------
# Face stream IO


def write_face_stream(path: str | Path, records) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for rec in records:
            obj: dict[str, object] = {"ts": int(rec.ts), "face": bool(rec.face_detected)}
            if rec.landmarks is not None:
                obj["lm"] = [[float(x), float(y)] for x, y in np.asarray(rec.landmarks)]
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def iter_face_stream(path: str | Path) -> Iterator[FaceFrameRecord]:
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"face stream not found: {path}")
    last_ts = -1
    with open(path, encoding="ascii") as fh:
        for index, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"corrupt face record at index {index}: {path}") from exc
            try:
                ts = int(obj["ts"])
                face = bool(obj["face"])
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"corrupt face record at index {index}: {path}") from exc
            lm = None
            if "lm" in obj and obj["lm"] is not None:
                if not face:
                    raise IngestError(
                        f"landmarks present but face=false at index {index}: {path}"
                    )
                arr = np.asarray(obj["lm"], dtype=np.float64)
                if arr.shape != (68, 2):
                    raise IngestError(
                        f"face record at index {index} must carry exactly 68 points: {path}"
                    )
                if not np.all(np.isfinite(arr)):
                    raise IngestError(f"non-finite landmark at index {index}: {path}")
                lm = arr
            if ts <= last_ts:
                raise IngestError(f"out-of-order timestamp at record index {index}: {path}")
            last_ts = ts
            yield FaceFrameRecord(ts, face, lm)


# ---------------------------------------------------------------------------
# Session directory


PRESENTATION_DIR = "presentation"


def participant_dir(session_dir: Path, participant_id: str) -> Path:
    return Path(session_dir) / f"P{participant_id}"


@dataclass
class SessionStreams:
    """Re-openable, lazily iterated session streams.

    Each accessor returns a *fresh* iterator over the same on-disk data, so
    re-opening yields identical sequences.
    """

    session_dir: Path
    config: SessionConfig

    def presentation(self) -> Iterator[ScreenFrameRecord]:
        return iter_frame_dir(self.session_dir / PRESENTATION_DIR)

    def screen(self, participant_id: str) -> Iterator[ScreenFrameRecord]:
        return iter_frame_dir(participant_dir(self.session_dir, participant_id) / "screen")

    def face(self, participant_id: str) -> Iterator[FaceFrameRecord]:
        return iter_face_stream(participant_dir(self.session_dir, participant_id) / "face.jsonl")

    def presentation_size(self) -> tuple[int, int]:
        return frame_dir_size(self.session_dir / PRESENTATION_DIR)

    def screen_size(self, participant_id: str) -> tuple[int, int]:
        return frame_dir_size(participant_dir(self.session_dir, participant_id) / "screen")


def open_streams(session_dir: str | Path, config: SessionConfig | None = None) -> SessionStreams:
    """Validate the session layout and return re-openable stream accessors.

    Raises :class:`IngestError` naming the participant whose stream is missing.
    """
    session_dir = Path(session_dir)
    if config is None:
        config = load_session_config(session_dir / "session.cfg")
    if not config.participants:
        raise ConfigError("session declares no participants")
    if not (session_dir / PRESENTATION_DIR).is_dir():
        raise IngestError(f"missing presentation stream directory: {session_dir / PRESENTATION_DIR}")
    for p in config.participants:
        pdir = participant_dir(session_dir, p.id)
        if not (pdir / "screen").is_dir():
            raise IngestError(f"missing screen stream for participant {p.id}")
        if not (pdir / "face.jsonl").is_file():
            raise IngestError(f"missing face stream for participant {p.id}")
    return SessionStreams(session_dir, config)
