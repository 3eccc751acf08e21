/**
 * End-to-end against the real engine: generates a synthetic auto-segmented
 * classroom session, launches `classgauge run --serve 0` paced to ~20 s of
 * wall time, and drives the full dashboard stack over real HTTP:
 *
 *   1. pre-event empty state until the first fixation-event scores arrive,
 *   2. mode-toggle round trip — command, acknowledgement, and the mode
 *      change landing on the next segment boundary,
 *   3. a forced mid-session reconnect that resumes with no duplicate or
 *      missing segments,
 *   4. server-side rejection of an invalid command.
 */

import { spawn, spawnSync, type ChildProcessWithoutNullStreams } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { createInterface } from "node:readline";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { FeedClient } from "../src/client.js";
import { sendModeCommand, toggleSegmentMode } from "../src/commands.js";
import { EMPTY_STATE_MESSAGE, buildViewModel, renderText } from "../src/render.js";
import {
  displayedMode,
  engineMode,
  initialViewState,
  reduce,
  type ViewAction,
  type ViewState,
} from "../src/state.js";

const RUN_SECONDS = 20; // 1000 frames at 10 fps, paced 5x real time

let sessionDir: string;
let engine: ChildProcessWithoutNullStreams;
let engineExit: Promise<number | null>;
let baseUrl: string;

let state: ViewState = initialViewState;
const dispatch = (action: ViewAction): void => {
  state = reduce(state, action);
};

async function waitFor(predicate: () => boolean, what: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!predicate()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((r) => setTimeout(r, 25));
  }
}

beforeAll(async () => {
  sessionDir = mkdtempSync(join(tmpdir(), "classgauge-e2e-"));
  const synth = spawnSync(
    "python3",
    ["-m", "classgauge", "synth-session", sessionDir, "--scenario", "auto", "--seed", "0"],
    { encoding: "utf-8", timeout: 60_000 },
  );
  if (synth.status !== 0) {
    throw new Error(`synth-session failed: ${synth.stderr || synth.stdout}`);
  }

  engine = spawn("python3", [
    "-m", "classgauge", "run",
    "--session", sessionDir,
    "--serve", "0",
    "--pace", "5",
    "--linger", "8",
  ]);
  engineExit = new Promise((resolve) => engine.on("exit", (code) => resolve(code)));

  const stderrChunks: string[] = [];
  engine.stderr.on("data", (chunk: Buffer) => stderrChunks.push(chunk.toString()));

  baseUrl = await new Promise<string>((resolve, reject) => {
    const timer = setTimeout(
      () => reject(new Error(`no FEED_PORT banner; stderr: ${stderrChunks.join("")}`)),
      60_000,
    );
    createInterface({ input: engine.stdout }).on("line", (line) => {
      const match = /^FEED_PORT=(\d+)$/.exec(line);
      if (match !== null) {
        clearTimeout(timer);
        resolve(`http://127.0.0.1:${match[1]}`);
      }
    });
    engine.on("exit", () => reject(new Error(`engine exited early; stderr: ${stderrChunks.join("")}`)));
  });
});

afterAll(async () => {
  if (engine && engine.exitCode === null) {
    engine.kill("SIGKILL");
    await engineExit;
  }
  if (sessionDir) rmSync(sessionDir, { recursive: true, force: true });
});

describe("dashboard against the live engine", () => {
  it(
    "shows the empty state, applies the mode toggle at the next boundary, and survives a reconnect",
    { timeout: (RUN_SECONDS + 60) * 1000 },
    async () => {
      // Phase 1: connect before any segment has completed - empty state.
      const clientA = new FeedClient(baseUrl, dispatch, { retryDelayMs: 200 });
      clientA.start();
      await waitFor(() => state.connection === "live", "feed connection", 15_000);
      expect(state.events).toHaveLength(0);
      const emptyView = renderText(buildViewModel(state));
      expect(emptyView).toContain(EMPTY_STATE_MESSAGE);
      expect(emptyView).not.toContain("%");

      // Phase 2: first scorecard arrives; engine is in automatic mode.
      await waitFor(() => state.events.length >= 1, "first score event", 60_000);
      expect(state.events[0]!.mode).toBe("automatic");
      expect(displayedMode(state)).toEqual({ mode: "automatic", slice_minutes: null });
      expect(renderText(buildViewModel(state))).not.toContain(EMPTY_STATE_MESSAGE);

      // Phase 3: server-side rejection of a command the engine must refuse
      // (client-side validation is bypassed via a raw selection object).
      await expect(
        sendModeCommand(baseUrl, { mode: "manual", slice_minutes: 9 as never }),
      ).rejects.toThrow(/slice/);

      // Phase 4: acknowledged toggle to manual/3; display follows the ack
      // immediately, the engine only at the next segment boundary.
      const acked = await toggleSegmentMode(baseUrl, dispatch, "manual", 3);
      expect(acked).toBe(true);
      expect(state.commandError).toBeNull();
      expect(displayedMode(state)).toEqual({ mode: "manual", slice_minutes: 3 });
      expect(engineMode(state)).toEqual({ mode: "automatic", slice_minutes: null });
      expect(renderText(buildViewModel(state))).toContain(
        "manual/3min (acknowledged; engine on automatic until next segment)",
      );

      // Phase 5: forced reconnect mid-session, resuming after the last seen
      // sequence number.
      clientA.stop();
      await waitFor(() => state.connection === "stale", "stale indicator", 10_000);
      expect(renderText(buildViewModel(state))).toContain("connection: stale");
      const clientB = new FeedClient(baseUrl, dispatch, {
        retryDelayMs: 200,
        initialLastEventId: clientA.lastEventId,
      });
      clientB.start();
      await waitFor(() => state.connection === "live", "resumed connection", 15_000);

      // Phase 6: run to the end; the toggle must have landed on a segment
      // boundary, and the resumed history must be gap- and duplicate-free.
      await waitFor(() => state.connection === "ended", "terminal end event", (RUN_SECONDS + 30) * 1000);
      clientB.stop();

      expect(state.events.length).toBeGreaterThanOrEqual(2);
      expect(state.events.map((e) => e.seq)).toEqual(state.events.map((_, i) => i));
      expect(state.endSeq).toBe(state.events.length);

      const last = state.events[state.events.length - 1]!;
      expect(last.mode).toBe("manual");
      expect(last.slice_minutes).toBe(3);
      expect(last.scorecard.segment.mode).toBe("manual");
      expect(last.scorecard.segment.slice_minutes).toBe(3);
      expect(engineMode(state)).toEqual({ mode: "manual", slice_minutes: 3 });

      for (const event of state.events) {
        expect(event.scorecard.students.map((s) => s.id)).toEqual(["S_eng", "S_read"]);
      }

      const finalView = renderText(buildViewModel(state));
      expect(finalView).toContain("connection: ended");
      expect(finalView).toContain("segment mode: manual/3min (acknowledged)");
      expect(finalView).toContain("S_eng");
      expect(finalView).toContain("S_read");

      // Phase 7: the engine shuts down cleanly after its linger window.
      const exitCode = await Promise.race([
        engineExit,
        new Promise<null>((r) => setTimeout(() => r(null), 20_000)),
      ]);
      expect(exitCode).toBe(0);
    },
  );
});
