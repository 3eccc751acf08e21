import { describe, expect, it } from "vitest";

import {
  FeedSchemaError,
  parseCommandAck,
  parseFeedEvent,
  parseScoreEvent,
  parseSnapshotEvent,
} from "../src/events.js";
import { asWire, scoreEvent, student } from "./helpers.js";

describe("score event parsing", () => {
  it("round-trips a well-formed event", () => {
    const wire = asWire(scoreEvent(2));
    expect(parseScoreEvent(wire)).toEqual(scoreEvent(2));
  });

  it("drops unknown fields at every level (nothing outside the schema survives)", () => {
    const wire = asWire(scoreEvent(0)) as Record<string, unknown>;
    wire["landmarks"] = "LEAKED";
    (wire["scorecard"] as Record<string, unknown>)["frame_pixels"] = "LEAKED";
    const seg = (wire["scorecard"] as Record<string, unknown>)["segment"] as Record<string, unknown>;
    seg["session_path"] = "LEAKED";
    const students = (wire["scorecard"] as Record<string, unknown>)["students"] as Record<string, unknown>[];
    students[0]!["gaze_trace"] = "LEAKED";
    (wire["dropped"] as Record<string, unknown>)["extra"] = "LEAKED";

    const parsed = parseScoreEvent(wire);
    expect(JSON.stringify(parsed)).not.toContain("LEAKED");
    expect(parsed).toEqual(scoreEvent(0));
  });

  it.each([
    ["seq", undefined],
    ["seq", 1.5],
    ["seq", -1],
    ["wall_ts", Number.NaN],
    ["mode", "freestyle"],
    ["dropped", null],
  ])("rejects bad %s = %j", (key, value) => {
    const wire = asWire(scoreEvent(0)) as Record<string, unknown>;
    if (value === undefined) delete wire[key as string];
    else wire[key as string] = value;
    expect(() => parseScoreEvent(wire)).toThrow(FeedSchemaError);
  });

  it("enforces the mode/slice pairing", () => {
    const manualNoSlice = asWire(scoreEvent(0)) as Record<string, unknown>;
    manualNoSlice["mode"] = "manual";
    expect(() => parseScoreEvent(manualNoSlice)).toThrow(/slice_minutes/);

    const autoWithSlice = asWire(scoreEvent(0)) as Record<string, unknown>;
    autoWithSlice["slice_minutes"] = 5;
    expect(() => parseScoreEvent(autoWithSlice)).toThrow(/slice_minutes/);

    const badSlice = asWire(scoreEvent(0)) as Record<string, unknown>;
    badSlice["mode"] = "manual";
    badSlice["slice_minutes"] = 7;
    expect(() => parseScoreEvent(badSlice)).toThrow(/3, 5, or 15/);
  });

  it("rejects out-of-range scores and malformed student ids", () => {
    const tooHigh = asWire(scoreEvent(0, { scorecard: { ...scoreEvent(0).scorecard, aggregate_score: 101 } }));
    expect(() => parseScoreEvent(tooHigh)).toThrow(/\[0, 100\]/);

    const badId = asWire(scoreEvent(0, {
      scorecard: { ...scoreEvent(0).scorecard, students: [student({ id: "no spaces" })] },
    }));
    expect(() => parseScoreEvent(badId)).toThrow(/identifier/);
  });

  it("keeps null scores as null (not-computable is distinct from zero)", () => {
    const wire = asWire(scoreEvent(0, {
      scorecard: {
        ...scoreEvent(0).scorecard,
        students: [student({ score: null, counted_events: 0, engaged_events: 0, min_context_distance: null })],
        aggregate_score: null,
        overall_score: null,
      },
    }));
    const parsed = parseScoreEvent(wire);
    expect(parsed.scorecard.students[0]!.score).toBeNull();
    expect(parsed.scorecard.aggregate_score).toBeNull();
  });
});

describe("snapshot and end parsing", () => {
  it("parses an empty snapshot", () => {
    const parsed = parseSnapshotEvent({ type: "snapshot", last_seq: -1, events: [] });
    expect(parsed.events).toEqual([]);
    expect(parsed.last_seq).toBe(-1);
  });

  it("parses embedded score events and names the offending index on failure", () => {
    const good = asWire({ type: "snapshot", last_seq: 1, events: [scoreEvent(0), scoreEvent(1)] });
    expect(parseSnapshotEvent(good).events).toHaveLength(2);

    const bad = asWire({ type: "snapshot", last_seq: 1, events: [scoreEvent(0), { type: "score" }] });
    expect(() => parseSnapshotEvent(bad)).toThrow(/events\[1\]/);
  });

  it("routes frames by event name and rejects unknown names", () => {
    expect(parseFeedEvent("end", '{"type":"end","seq":4,"wall_ts":1.5}').type).toBe("end");
    expect(() => parseFeedEvent("telemetry", "{}")).toThrow(FeedSchemaError);
    expect(() => parseFeedEvent("score", "not json")).toThrow(/valid JSON/);
  });
});

describe("command ack parsing", () => {
  it("accepts the documented ack shape", () => {
    const ack = parseCommandAck({
      ok: true, mode: "manual", slice_minutes: 5, applies: "next-boundary", changed: true,
    });
    expect(ack.mode).toBe("manual");
    expect(ack.slice_minutes).toBe(5);
  });

  it("rejects failure payloads and malformed acks", () => {
    expect(() => parseCommandAck({ ok: false, error: "nope" })).toThrow(FeedSchemaError);
    expect(() => parseCommandAck({ ok: true, mode: "manual", slice_minutes: null, applies: "next-boundary", changed: false }))
      .toThrow(/slice_minutes/);
  });
});
