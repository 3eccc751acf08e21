/**
 * Golden replay: a feed recorded from a real engine run (auto-segmented
 * synthetic classroom: one engaged student, one reading unrelated content)
 * is replayed through decoder, parser, and reducer; the rendered view must
 * match the checked-in golden file byte for byte.
 */

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import { parseFeedEvent } from "../src/events.js";
import { buildViewModel, renderText } from "../src/render.js";
import {
  actionForFeedEvent,
  initialViewState,
  reduce,
  studentIds,
  type ViewState,
} from "../src/state.js";
import { SseDecoder } from "../src/sse.js";

const FIXTURE = fileURLToPath(new URL("./fixtures/recorded-feed.sse", import.meta.url));
const GOLDEN = fileURLToPath(new URL("./fixtures/golden-view.txt", import.meta.url));

function replay(wire: string, chunkSize: number): ViewState {
  let state = reduce(initialViewState, { kind: "open" });
  const decoder = new SseDecoder();
  for (let i = 0; i < wire.length; i += chunkSize) {
    for (const frame of decoder.push(wire.slice(i, i + chunkSize))) {
      state = reduce(state, actionForFeedEvent(parseFeedEvent(frame.event, frame.data)));
    }
  }
  return state;
}

describe("recorded-feed replay", () => {
  const wire = readFileSync(FIXTURE, "utf-8");

  it("starts with an empty snapshot and carries four segments plus the end marker", () => {
    const state = replay(wire, wire.length);
    expect(state.events.map((e) => e.seq)).toEqual([0, 1, 2, 3]);
    expect(state.endSeq).toBe(4);
    expect(state.connection).toBe("ended");
    expect(studentIds(state)).toEqual(["S_eng", "S_read"]);
  });

  it("reproduces the golden scorecard view byte for byte", () => {
    const golden = readFileSync(GOLDEN, "utf-8");
    const rendered = renderText(buildViewModel(replay(wire, wire.length)));
    expect(rendered).toBe(golden);
  });

  it("is chunking-invariant: any transport fragmentation yields the same view", () => {
    const whole = renderText(buildViewModel(replay(wire, wire.length)));
    for (const chunkSize of [1, 7, 64, 1024]) {
      expect(renderText(buildViewModel(replay(wire, chunkSize)))).toBe(whole);
    }
  });

  it("is replay-idempotent: feeding the recording twice changes nothing", () => {
    let state = replay(wire, 512);
    const once = renderText(buildViewModel(state));
    const decoder = new SseDecoder();
    for (const frame of decoder.push(wire)) {
      state = reduce(state, actionForFeedEvent(parseFeedEvent(frame.event, frame.data)));
    }
    expect(renderText(buildViewModel(state))).toBe(once);
  });
});
