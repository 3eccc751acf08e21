/**
 * Feed event schema: types and whitelist parsing.
 *
 * Every payload coming off the wire is rebuilt field by field into a fresh
 * object containing only the documented keys (docs/FORMATS.md §8 in the
 * repository root). Unknown fields are dropped at the parse boundary, so
 * nothing outside the published schema can ever reach the view layer;
 * missing or ill-typed fields raise `FeedSchemaError` naming the offending
 * path and the frame is discarded.
 */

export type SegmentationMode = "automatic" | "manual";
export type SliceMinutes = 3 | 5 | 15;

export interface StudentScore {
  readonly id: string;
  readonly engaged_events: number;
  readonly counted_events: number;
  readonly score: number | null;
  readonly min_context_distance: number | null;
  readonly insufficient_events: number;
}

export interface SegmentInfo {
  readonly index: number;
  readonly start: number;
  readonly end: number;
  readonly mode: SegmentationMode;
  readonly slice_minutes: SliceMinutes | null;
  readonly significant: boolean;
}

export interface PresentationScore {
  readonly matched_events: number;
  readonly total_events: number;
  readonly score: number | null;
}

export interface Scorecard {
  readonly segment: SegmentInfo;
  readonly students: readonly StudentScore[];
  readonly aggregate_score: number | null;
  readonly presentation: PresentationScore;
  readonly overall_score: number | null;
}

export interface DroppedCounts {
  readonly screen: number;
  readonly presentation: number;
  readonly face: number;
}

export interface ScoreEvent {
  readonly type: "score";
  readonly seq: number;
  readonly wall_ts: number;
  readonly mode: SegmentationMode;
  readonly slice_minutes: SliceMinutes | null;
  readonly dropped: DroppedCounts;
  readonly scorecard: Scorecard;
}

export interface EndEvent {
  readonly type: "end";
  readonly seq: number;
  readonly wall_ts: number;
}

export interface SnapshotEvent {
  readonly type: "snapshot";
  readonly last_seq: number;
  readonly events: readonly ScoreEvent[];
}

export type FeedEvent = ScoreEvent | EndEvent | SnapshotEvent;

/** Successful acknowledgement of a segmentation-mode command. */
export interface CommandAck {
  readonly ok: true;
  readonly mode: SegmentationMode;
  readonly slice_minutes: SliceMinutes | null;
  readonly applies: string;
  readonly changed: boolean;
}

export class FeedSchemaError extends Error {
  constructor(path: string, message: string) {
    super(`${path}: ${message}`);
    this.name = "FeedSchemaError";
  }
}

const ID_PATTERN = /^[A-Za-z0-9_-]{1,64}$/;

function fail(path: string, message: string): never {
  throw new FeedSchemaError(path, message);
}

function asObject(value: unknown, path: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    fail(path, "expected an object");
  }
  return value as Record<string, unknown>;
}

function asInt(value: unknown, path: string, minimum = 0): number {
  if (typeof value !== "number" || !Number.isInteger(value)) {
    fail(path, "expected an integer");
  }
  if (value < minimum) fail(path, `must be >= ${minimum}`);
  return value;
}

function asNumber(value: unknown, path: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    fail(path, "expected a finite number");
  }
  return value;
}

function asScoreOrNull(value: unknown, path: string): number | null {
  if (value === null) return null;
  const n = asNumber(value, path);
  if (n < 0 || n > 100) fail(path, "must lie in [0, 100]");
  return n;
}

function asBoolean(value: unknown, path: string): boolean {
  if (typeof value !== "boolean") fail(path, "expected a boolean");
  return value;
}

function asMode(value: unknown, path: string): SegmentationMode {
  if (value !== "automatic" && value !== "manual") {
    fail(path, 'expected "automatic" or "manual"');
  }
  return value;
}

function asSlice(
  value: unknown,
  mode: SegmentationMode,
  path: string,
): SliceMinutes | null {
  if (value === null) {
    if (mode === "manual") fail(path, "required in manual mode");
    return null;
  }
  if (mode === "automatic") fail(path, "must be null in automatic mode");
  if (value !== 3 && value !== 5 && value !== 15) {
    fail(path, "expected 3, 5, or 15");
  }
  return value;
}

function parseStudent(value: unknown, path: string): StudentScore {
  const obj = asObject(value, path);
  const id = obj["id"];
  if (typeof id !== "string" || !ID_PATTERN.test(id)) {
    fail(`${path}.id`, "expected an identifier string");
  }
  return {
    id,
    engaged_events: asInt(obj["engaged_events"], `${path}.engaged_events`),
    counted_events: asInt(obj["counted_events"], `${path}.counted_events`),
    score: asScoreOrNull(obj["score"], `${path}.score`),
    min_context_distance:
      obj["min_context_distance"] === null
        ? null
        : asNumber(obj["min_context_distance"], `${path}.min_context_distance`),
    insufficient_events: asInt(
      obj["insufficient_events"],
      `${path}.insufficient_events`,
    ),
  };
}

function parseScorecard(value: unknown, path: string): Scorecard {
  const obj = asObject(value, path);
  const seg = asObject(obj["segment"], `${path}.segment`);
  const mode = asMode(seg["mode"], `${path}.segment.mode`);
  const start = asInt(seg["start"], `${path}.segment.start`);
  const segment: SegmentInfo = {
    index: asInt(seg["index"], `${path}.segment.index`),
    start,
    end: asInt(seg["end"], `${path}.segment.end`, start),
    mode,
    slice_minutes: asSlice(seg["slice_minutes"], mode, `${path}.segment.slice_minutes`),
    significant: asBoolean(seg["significant"], `${path}.segment.significant`),
  };

  const rawStudents = obj["students"];
  if (!Array.isArray(rawStudents)) fail(`${path}.students`, "expected an array");
  const students = rawStudents.map((s, i) => parseStudent(s, `${path}.students[${i}]`));

  const pres = asObject(obj["presentation"], `${path}.presentation`);
  const presentation: PresentationScore = {
    matched_events: asInt(pres["matched_events"], `${path}.presentation.matched_events`),
    total_events: asInt(pres["total_events"], `${path}.presentation.total_events`),
    score: asScoreOrNull(pres["score"], `${path}.presentation.score`),
  };

  return {
    segment,
    students,
    aggregate_score: asScoreOrNull(obj["aggregate_score"], `${path}.aggregate_score`),
    presentation,
    overall_score: asScoreOrNull(obj["overall_score"], `${path}.overall_score`),
  };
}

export function parseScoreEvent(value: unknown, path = "$"): ScoreEvent {
  const obj = asObject(value, path);
  if (obj["type"] !== "score") fail(`${path}.type`, 'expected "score"');
  const mode = asMode(obj["mode"], `${path}.mode`);
  const dropped = asObject(obj["dropped"], `${path}.dropped`);
  return {
    type: "score",
    seq: asInt(obj["seq"], `${path}.seq`),
    wall_ts: asNumber(obj["wall_ts"], `${path}.wall_ts`),
    mode,
    slice_minutes: asSlice(obj["slice_minutes"], mode, `${path}.slice_minutes`),
    dropped: {
      screen: asInt(dropped["screen"], `${path}.dropped.screen`),
      presentation: asInt(dropped["presentation"], `${path}.dropped.presentation`),
      face: asInt(dropped["face"], `${path}.dropped.face`),
    },
    scorecard: parseScorecard(obj["scorecard"], `${path}.scorecard`),
  };
}

export function parseEndEvent(value: unknown, path = "$"): EndEvent {
  const obj = asObject(value, path);
  if (obj["type"] !== "end") fail(`${path}.type`, 'expected "end"');
  return {
    type: "end",
    seq: asInt(obj["seq"], `${path}.seq`),
    wall_ts: asNumber(obj["wall_ts"], `${path}.wall_ts`),
  };
}

export function parseSnapshotEvent(value: unknown, path = "$"): SnapshotEvent {
  const obj = asObject(value, path);
  if (obj["type"] !== "snapshot") fail(`${path}.type`, 'expected "snapshot"');
  const rawEvents = obj["events"];
  if (!Array.isArray(rawEvents)) fail(`${path}.events`, "expected an array");
  return {
    type: "snapshot",
    last_seq: asInt(obj["last_seq"], `${path}.last_seq`, -1),
    events: rawEvents.map((e, i) => parseScoreEvent(e, `${path}.events[${i}]`)),
  };
}

/** Parse one named SSE frame into a typed feed event. */
export function parseFeedEvent(eventName: string, dataJson: string): FeedEvent {
  let value: unknown;
  try {
    value = JSON.parse(dataJson);
  } catch {
    fail("$", "data is not valid JSON");
  }
  switch (eventName) {
    case "snapshot":
      return parseSnapshotEvent(value);
    case "score":
      return parseScoreEvent(value);
    case "end":
      return parseEndEvent(value);
    default:
      fail("$", `unknown feed event type ${JSON.stringify(eventName)}`);
  }
}

export function parseCommandAck(value: unknown, path = "$"): CommandAck {
  const obj = asObject(value, path);
  if (obj["ok"] !== true) fail(`${path}.ok`, "expected true");
  const mode = asMode(obj["mode"], `${path}.mode`);
  const applies = obj["applies"];
  if (typeof applies !== "string") fail(`${path}.applies`, "expected a string");
  return {
    ok: true,
    mode,
    slice_minutes: asSlice(obj["slice_minutes"], mode, `${path}.slice_minutes`),
    applies,
    changed: asBoolean(obj["changed"], `${path}.changed`),
  };
}
