import { describe, expect, it } from "vitest";

import { parseScoreEvent } from "../src/events.js";
import {
  EMPTY_STATE_MESSAGE,
  buildViewModel,
  formatScore,
  renderHtml,
  renderText,
} from "../src/render.js";
import { initialViewState, reduce, type ViewState } from "../src/state.js";
import { asWire, scoreEvent, student } from "./helpers.js";

function withEvents(...events: ReturnType<typeof scoreEvent>[]): ViewState {
  return events.reduce(
    (state, event) => reduce(state, { kind: "score", event }),
    reduce(initialViewState, { kind: "open" }),
  );
}

describe("score formatting", () => {
  it('renders 75 as "75%"', () => {
    expect(formatScore(75.0)).toBe("75%");
  });

  it('renders a zero-denominator (null) score as "N/A", never "0%"', () => {
    expect(formatScore(null)).toBe("N/A");
  });

  it("renders a genuine zero as 0% and rounds fractions to one decimal", () => {
    expect(formatScore(0)).toBe("0%");
    expect(formatScore(200 / 3)).toBe("66.7%");
    expect(formatScore(100)).toBe("100%");
    expect(formatScore(87.5)).toBe("87.5%");
  });
});

describe("view model", () => {
  it("shows the empty-state placeholder until the first score event", () => {
    const vm = buildViewModel(reduce(initialViewState, { kind: "open" }));
    expect(vm.empty).toBe(true);
    expect(vm.rows).toEqual([]);
    expect(renderText(vm)).toContain(EMPTY_STATE_MESSAGE);
    expect(renderHtml(vm)).toContain("empty-state");
  });

  it("builds one row per student with current score and history trend", () => {
    const e0 = scoreEvent(0);
    const e1 = scoreEvent(1, {
      scorecard: {
        ...scoreEvent(1).scorecard,
        students: [student({ score: null, counted_events: 0, engaged_events: 0 })],
      },
    });
    const vm = buildViewModel(withEvents(e0, e1));
    expect(vm.empty).toBe(false);
    expect(vm.rows).toHaveLength(1);
    const row = vm.rows[0]!;
    expect(row.id).toBe("S1");
    expect(row.score).toBe("N/A");
    expect(row.trend).toHaveLength(2); // one mark per segment, oldest first
    expect(row.trend.endsWith("·")).toBe(true); // N/A mark
  });

  it("never renders anything outside the feed schema (privacy contract)", () => {
    const wire = asWire(scoreEvent(0)) as Record<string, unknown>;
    wire["webcam_frame"] = "LEAKED-TOP";
    ((wire["scorecard"] as Record<string, unknown>)["students"] as Record<string, unknown>[])[0]![
      "landmarks"
    ] = "LEAKED-STUDENT";
    const state = withEvents(parseScoreEvent(wire));
    const text = renderText(buildViewModel(state));
    const html = renderHtml(buildViewModel(state));
    expect(text).not.toContain("LEAKED");
    expect(html).not.toContain("LEAKED");
  });

  it("reports per-kind dropped-frame counts when nonzero", () => {
    const vm = buildViewModel(
      withEvents(scoreEvent(0, { dropped: { screen: 12, presentation: 0, face: 3 } })),
    );
    expect(vm.droppedLine).toBe("screen 12, presentation 0, face 3");
  });
});

describe("text rendering", () => {
  it("is a pure function of the state (same state, same bytes)", () => {
    const state = withEvents(scoreEvent(0), scoreEvent(1));
    expect(renderText(buildViewModel(state))).toBe(renderText(buildViewModel(state)));
  });

  it("lays out the full table with aggregate, presentation, and mode lines", () => {
    const text = renderText(buildViewModel(withEvents(scoreEvent(0))));
    expect(text).toContain("segment mode: automatic");
    expect(text).toContain("1 segment scored (latest #0, frames 0-1499)");
    expect(text).toContain("S1");
    expect(text).toContain("75%");
    expect(text).toContain("3/4");
    expect(text).toContain("class aggregate: 75% (overall so far: 75%)");
    expect(text).toContain("presentation score: 100% (2/2 events matched)");
    expect(text).toContain("dropped frames: none");
  });

  it("marks an acknowledged command that the engine has not reached yet", () => {
    let state = withEvents(scoreEvent(0));
    state = reduce(state, {
      kind: "command-ack",
      ack: { ok: true, mode: "manual", slice_minutes: 15, applies: "next-boundary", changed: true },
    });
    const text = renderText(buildViewModel(state));
    expect(text).toContain(
      "segment mode: manual/15min (acknowledged; engine on automatic until next segment)",
    );
  });

  it("shows inline command errors", () => {
    let state = withEvents(scoreEvent(0));
    state = reduce(state, { kind: "command-rejected", message: "slice_minutes must be 3|5|15" });
    expect(renderText(buildViewModel(state))).toContain("command error: slice_minutes must be 3|5|15");
  });
});

describe("html rendering", () => {
  it("escapes markup in data-derived strings", () => {
    let state = withEvents(scoreEvent(0));
    state = reduce(state, { kind: "command-rejected", message: '<img src=x onerror="pwn()">' });
    const html = renderHtml(buildViewModel(state));
    expect(html).not.toContain("<img");
    expect(html).toContain("&lt;img src=x onerror=&quot;pwn()&quot;&gt;");
  });
});
