/** Shared test fixtures: well-formed feed events with targeted overrides. */

import type { ScoreEvent, Scorecard, StudentScore } from "../src/events.js";

export function student(overrides: Partial<StudentScore> = {}): StudentScore {
  return {
    id: "S1",
    engaged_events: 3,
    counted_events: 4,
    score: 75.0,
    min_context_distance: 0.012,
    insufficient_events: 0,
    ...overrides,
  };
}

export function scorecard(overrides: Partial<Scorecard> = {}): Scorecard {
  return {
    segment: {
      index: 0,
      start: 0,
      end: 1499,
      mode: "automatic",
      slice_minutes: null,
      significant: true,
    },
    students: [student()],
    aggregate_score: 75.0,
    presentation: { matched_events: 2, total_events: 2, score: 100.0 },
    overall_score: 75.0,
    ...overrides,
  };
}

export function scoreEvent(
  seq: number,
  overrides: Partial<Omit<ScoreEvent, "type">> = {},
): ScoreEvent {
  return {
    type: "score",
    seq,
    wall_ts: 1700000000 + seq,
    mode: "automatic",
    slice_minutes: null,
    dropped: { screen: 0, presentation: 0, face: 0 },
    scorecard: scorecard({
      segment: {
        index: seq,
        start: seq * 1500,
        end: seq * 1500 + 1499,
        mode: "automatic",
        slice_minutes: null,
        significant: true,
      },
    }),
    ...overrides,
  };
}

/** JSON round-trip so parsers see plain data, not our typed objects. */
export function asWire(value: unknown): unknown {
  return JSON.parse(JSON.stringify(value));
}

export function deepFreeze<T>(value: T): T {
  if (typeof value === "object" && value !== null && !Object.isFrozen(value)) {
    Object.freeze(value);
    for (const key of Object.getOwnPropertyNames(value)) {
      deepFreeze((value as Record<string, unknown>)[key]);
    }
  }
  return value;
}
