/**
 * Pure rendering: ViewState -> view model -> text / HTML.
 *
 * The view model is plain data derived only from the whitelisted feed schema
 * and the command state; both renderers are deterministic functions of it,
 * which is what makes golden-file replay tests possible. A score that cannot
 * be computed (no countable events) renders as "N/A" — never as "0%".
 */

import type { ScoreEvent } from "./events.js";
import {
  displayedMode,
  engineMode,
  latestEvent,
  studentIds,
  type ModeSelection,
  type ViewState,
} from "./state.js";

export interface StudentRow {
  readonly id: string;
  /** Formatted current-segment score, e.g. "75%" or "N/A". */
  readonly score: string;
  /** Engaged over counted events in the current segment, e.g. "2/2". */
  readonly events: string;
  /** Smallest context distance seen this segment, or em dash. */
  readonly contextDistance: string;
  /** Events excluded for insufficient gaze data this segment. */
  readonly insufficient: string;
  /** Per-segment score history sparkline, oldest first. */
  readonly trend: string;
}

export interface ViewModel {
  readonly connection: string;
  readonly modeLine: string;
  readonly segmentLine: string | null;
  readonly rows: readonly StudentRow[];
  readonly aggregate: string | null;
  readonly overall: string | null;
  readonly presentationLine: string | null;
  readonly droppedLine: string | null;
  readonly commandError: string | null;
  readonly pendingCommand: string | null;
  /** True until the first score event arrives. */
  readonly empty: boolean;
}

export const EMPTY_STATE_MESSAGE =
  "no scores yet — waiting for the first fixation event";

/** "75%", "66.7%", "0%"; null (nothing countable) -> "N/A". */
export function formatScore(score: number | null): string {
  if (score === null) return "N/A";
  const rounded = Math.round(score * 10) / 10;
  return (Number.isInteger(rounded) ? rounded.toFixed(0) : rounded.toFixed(1)) + "%";
}

const SPARK_LEVELS = "▁▂▃▄▅▆▇█";

function sparkline(scores: readonly (number | null)[]): string {
  return scores
    .map((s) => {
      if (s === null) return "·";
      const idx = Math.min(SPARK_LEVELS.length - 1, Math.floor((s / 100) * SPARK_LEVELS.length));
      return SPARK_LEVELS[idx]!;
    })
    .join("");
}

function formatMode(selection: ModeSelection): string {
  return selection.mode === "automatic"
    ? "automatic"
    : `manual/${selection.slice_minutes}min`;
}

function sameMode(a: ModeSelection | null, b: ModeSelection | null): boolean {
  return a !== null && b !== null && a.mode === b.mode && a.slice_minutes === b.slice_minutes;
}

function modeLine(state: ViewState): string {
  const shown = displayedMode(state);
  if (shown === null) return "(not yet reported)";
  if (state.acknowledged === null) return formatMode(shown);
  const engine = engineMode(state);
  if (engine === null || sameMode(state.acknowledged, engine)) {
    return `${formatMode(shown)} (acknowledged)`;
  }
  return `${formatMode(shown)} (acknowledged; engine on ${formatMode(engine)} until next segment)`;
}

function buildRows(state: ViewState, latest: ScoreEvent): readonly StudentRow[] {
  const history = new Map<string, (number | null)[]>();
  for (const id of studentIds(state)) history.set(id, []);
  for (const event of state.events) {
    const bySeg = new Map(event.scorecard.students.map((s) => [s.id, s.score]));
    for (const [id, scores] of history) {
      scores.push(bySeg.has(id) ? (bySeg.get(id) as number | null) : null);
    }
  }
  return latest.scorecard.students.map((student) => ({
    id: student.id,
    score: formatScore(student.score),
    events: `${student.engaged_events}/${student.counted_events}`,
    contextDistance:
      student.min_context_distance === null
        ? "—"
        : student.min_context_distance.toFixed(3),
    insufficient: String(student.insufficient_events),
    trend: sparkline(history.get(student.id) ?? []),
  }));
}

export function buildViewModel(state: ViewState): ViewModel {
  const latest = latestEvent(state);
  const pending = state.pending === null ? null : formatMode(state.pending);
  if (latest === null) {
    return {
      connection: state.connection,
      modeLine: modeLine(state),
      segmentLine: null,
      rows: [],
      aggregate: null,
      overall: null,
      presentationLine: null,
      droppedLine: null,
      commandError: state.commandError,
      pendingCommand: pending,
      empty: true,
    };
  }
  const seg = latest.scorecard.segment;
  const pres = latest.scorecard.presentation;
  const dropped = latest.dropped;
  const droppedTotal = dropped.screen + dropped.presentation + dropped.face;
  return {
    connection: state.connection,
    modeLine: modeLine(state),
    segmentLine:
      `${state.events.length} segment${state.events.length === 1 ? "" : "s"} scored` +
      ` (latest #${seg.index}, frames ${seg.start}-${seg.end})`,
    rows: buildRows(state, latest),
    aggregate: formatScore(latest.scorecard.aggregate_score),
    overall: formatScore(latest.scorecard.overall_score),
    presentationLine:
      `${formatScore(pres.score)} (${pres.matched_events}/${pres.total_events} events matched)`,
    droppedLine:
      droppedTotal === 0
        ? "none"
        : `screen ${dropped.screen}, presentation ${dropped.presentation}, face ${dropped.face}`,
    commandError: state.commandError,
    pendingCommand: pending,
    empty: false,
  };
}

function pad(text: string, width: number): string {
  return text.length >= width ? text : text + " ".repeat(width - text.length);
}

function padLeft(text: string, width: number): string {
  return text.length >= width ? text : " ".repeat(width - text.length) + text;
}

/** Deterministic plain-text rendering; the golden-file format. */
export function renderText(vm: ViewModel): string {
  const lines: string[] = [];
  lines.push("classgauge — class engagement");
  lines.push(`connection: ${vm.connection}`);
  lines.push(`segment mode: ${vm.modeLine}`);
  if (vm.pendingCommand !== null) lines.push(`command pending: ${vm.pendingCommand}`);
  if (vm.commandError !== null) lines.push(`command error: ${vm.commandError}`);
  if (vm.empty) {
    lines.push(EMPTY_STATE_MESSAGE);
    return lines.join("\n") + "\n";
  }
  lines.push(`${vm.segmentLine}`);
  lines.push("");
  const idWidth = Math.max(7, ...vm.rows.map((r) => r.id.length));
  lines.push(
    `${pad("student", idWidth)}  ${padLeft("score", 6)}  ${padLeft("events", 6)}  ` +
      `${padLeft("ctx-dist", 8)}  ${padLeft("insuff", 6)}  trend`,
  );
  for (const row of vm.rows) {
    lines.push(
      `${pad(row.id, idWidth)}  ${padLeft(row.score, 6)}  ${padLeft(row.events, 6)}  ` +
        `${padLeft(row.contextDistance, 8)}  ${padLeft(row.insufficient, 6)}  ${row.trend}`,
    );
  }
  lines.push("");
  lines.push(`class aggregate: ${vm.aggregate} (overall so far: ${vm.overall})`);
  lines.push(`presentation score: ${vm.presentationLine}`);
  lines.push(`dropped frames: ${vm.droppedLine}`);
  return lines.join("\n") + "\n";
}

function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

/** HTML rendering of the same view model, for the browser shell. */
export function renderHtml(vm: ViewModel): string {
  const parts: string[] = [];
  parts.push(`<p class="status status-${escapeHtml(vm.connection)}">` +
    `connection: <strong>${escapeHtml(vm.connection)}</strong></p>`);
  parts.push(`<p class="mode">segment mode: ${escapeHtml(vm.modeLine)}</p>`);
  if (vm.pendingCommand !== null) {
    parts.push(`<p class="pending">command pending: ${escapeHtml(vm.pendingCommand)}</p>`);
  }
  if (vm.commandError !== null) {
    parts.push(`<p class="command-error">command error: ${escapeHtml(vm.commandError)}</p>`);
  }
  if (vm.empty) {
    parts.push(`<p class="empty-state">${escapeHtml(EMPTY_STATE_MESSAGE)}</p>`);
    return parts.join("\n");
  }
  parts.push(`<p class="segments">${escapeHtml(vm.segmentLine ?? "")}</p>`);
  parts.push("<table><thead><tr>" +
    "<th>student</th><th>score</th><th>events</th>" +
    "<th>ctx-dist</th><th>insuff</th><th>trend</th>" +
    "</tr></thead><tbody>");
  for (const row of vm.rows) {
    parts.push(
      "<tr>" +
        `<td>${escapeHtml(row.id)}</td>` +
        `<td>${escapeHtml(row.score)}</td>` +
        `<td>${escapeHtml(row.events)}</td>` +
        `<td>${escapeHtml(row.contextDistance)}</td>` +
        `<td>${escapeHtml(row.insufficient)}</td>` +
        `<td class="trend">${escapeHtml(row.trend)}</td>` +
        "</tr>",
    );
  }
  parts.push("</tbody></table>");
  parts.push(`<p class="aggregate">class aggregate: <strong>${escapeHtml(vm.aggregate ?? "")}` +
    `</strong> (overall so far: ${escapeHtml(vm.overall ?? "")})</p>`);
  parts.push(`<p class="presentation">presentation score: ` +
    `${escapeHtml(vm.presentationLine ?? "")}</p>`);
  parts.push(`<p class="dropped">dropped frames: ${escapeHtml(vm.droppedLine ?? "")}</p>`);
  return parts.join("\n");
}
