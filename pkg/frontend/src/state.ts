/**
 * Dashboard view state: a pure reducer over feed events and command
 * acknowledgements.
 *
 * The state is an immutable value; `reduce` never mutates its input. Score
 * history is append-only and deduplicated by sequence number, so replaying a
 * recorded feed — in any chunking, with resume overlaps — always produces the
 * same state. The mode shown to the instructor is the last *acknowledged*
 * command; until one exists it falls back to the mode reported by the engine
 * itself on the latest score event.
 */

import type {
  CommandAck,
  EndEvent,
  FeedEvent,
  ScoreEvent,
  SegmentationMode,
  SliceMinutes,
  SnapshotEvent,
} from "./events.js";

export type ConnectionStatus = "idle" | "connecting" | "live" | "stale" | "ended";

export interface ModeSelection {
  readonly mode: SegmentationMode;
  readonly slice_minutes: SliceMinutes | null;
}

export interface ViewState {
  readonly connection: ConnectionStatus;
  /** Applied score events, ascending by seq, deduplicated. Append-only. */
  readonly events: readonly ScoreEvent[];
  /** Highest applied score-event seq; -1 before the first one. */
  readonly lastSeq: number;
  /** Seq of the terminal end event, once seen. */
  readonly endSeq: number | null;
  /** Last acknowledged mode command; governs the mode control's display. */
  readonly acknowledged: ModeSelection | null;
  /** Command sent but not yet acknowledged. */
  readonly pending: ModeSelection | null;
  /** Last command rejection, shown inline until the next command. */
  readonly commandError: string | null;
}

export const initialViewState: ViewState = {
  connection: "idle",
  events: [],
  lastSeq: -1,
  endSeq: null,
  acknowledged: null,
  pending: null,
  commandError: null,
};

export type ViewAction =
  | { readonly kind: "connecting" }
  | { readonly kind: "open" }
  | { readonly kind: "disconnected" }
  | { readonly kind: "snapshot"; readonly event: SnapshotEvent }
  | { readonly kind: "score"; readonly event: ScoreEvent }
  | { readonly kind: "end"; readonly event: EndEvent }
  | { readonly kind: "command-sent"; readonly request: ModeSelection }
  | { readonly kind: "command-ack"; readonly ack: CommandAck }
  | { readonly kind: "command-rejected"; readonly message: string };

function appendScores(state: ViewState, incoming: readonly ScoreEvent[]): ViewState {
  const fresh = incoming.filter((e) => e.seq > state.lastSeq);
  if (fresh.length === 0) return state;
  return {
    ...state,
    events: [...state.events, ...fresh],
    lastSeq: fresh[fresh.length - 1]!.seq,
  };
}

export function reduce(state: ViewState, action: ViewAction): ViewState {
  switch (action.kind) {
    case "connecting":
      return state.connection === "ended" ? state : { ...state, connection: "connecting" };
    case "open":
      return state.connection === "ended" ? state : { ...state, connection: "live" };
    case "disconnected":
      return state.endSeq !== null
        ? { ...state, connection: "ended" }
        : { ...state, connection: "stale" };
    case "snapshot":
      return appendScores(state, action.event.events);
    case "score":
      return appendScores(state, [action.event]);
    case "end":
      return { ...state, endSeq: action.event.seq, connection: "ended" };
    case "command-sent":
      return { ...state, pending: action.request, commandError: null };
    case "command-ack":
      return {
        ...state,
        acknowledged: { mode: action.ack.mode, slice_minutes: action.ack.slice_minutes },
        pending: null,
        commandError: null,
      };
    case "command-rejected":
      return { ...state, pending: null, commandError: action.message };
  }
}

/** The reducer action corresponding to one parsed feed event. */
export function actionForFeedEvent(event: FeedEvent): ViewAction {
  switch (event.type) {
    case "snapshot":
      return { kind: "snapshot", event };
    case "score":
      return { kind: "score", event };
    case "end":
      return { kind: "end", event };
  }
}

/** Latest applied score event, if any. */
export function latestEvent(state: ViewState): ScoreEvent | null {
  return state.events.length > 0 ? state.events[state.events.length - 1]! : null;
}

/** Mode reported by the engine on the latest score event. */
export function engineMode(state: ViewState): ModeSelection | null {
  const latest = latestEvent(state);
  return latest === null ? null : { mode: latest.mode, slice_minutes: latest.slice_minutes };
}

/**
 * The mode the control displays: always the last acknowledged command when
 * one exists (acknowledged changes apply at the next segment boundary, so it
 * may legitimately differ from the engine-reported mode until then).
 */
export function displayedMode(state: ViewState): ModeSelection | null {
  return state.acknowledged ?? engineMode(state);
}

/** Student ids in first-seen order across the whole history. */
export function studentIds(state: ViewState): readonly string[] {
  const ids: string[] = [];
  for (const event of state.events) {
    for (const student of event.scorecard.students) {
      if (!ids.includes(student.id)) ids.push(student.id);
    }
  }
  return ids;
}
