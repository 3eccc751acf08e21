/**
 * Segmentation-mode commands: client-side validation, POST, ack handling.
 *
 * Invalid requests (manual without a 3/5/15 slice, a slice in automatic
 * mode) are blocked before any network traffic and surface as an inline
 * command error. Valid requests are sent to `POST /command`; the UI's
 * displayed mode changes only when the acknowledgement arrives, matching the
 * engine's "applies at the next segment boundary" contract. Repeating the
 * already-acknowledged command is harmless: the engine answers
 * `changed: false` and the acknowledged state is unchanged.
 */

import { parseCommandAck, type CommandAck } from "./events.js";
import type { ModeSelection, ViewAction } from "./state.js";

export class CommandValidationError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CommandValidationError";
  }
}

export class CommandRejectedError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "CommandRejectedError";
  }
}

const SLICES: readonly number[] = [3, 5, 15];

/** Validate a mode request; throws CommandValidationError when invalid. */
export function validateModeRequest(mode: string, slice?: number): ModeSelection {
  if (mode !== "automatic" && mode !== "manual") {
    throw new CommandValidationError(`unknown mode ${JSON.stringify(mode)}`);
  }
  if (mode === "manual") {
    if (slice === undefined || !SLICES.includes(slice)) {
      throw new CommandValidationError("manual mode needs a slice of 3, 5, or 15 minutes");
    }
    return { mode, slice_minutes: slice as 3 | 5 | 15 };
  }
  if (slice !== undefined) {
    throw new CommandValidationError("automatic mode does not take a slice");
  }
  return { mode, slice_minutes: null };
}

/** POST a validated selection to the engine; resolves to the parsed ack. */
export async function sendModeCommand(
  baseUrl: string,
  selection: ModeSelection,
  fetchImpl: typeof fetch = fetch,
): Promise<CommandAck> {
  const body: Record<string, unknown> = { mode: selection.mode };
  if (selection.mode === "manual") body["slice"] = selection.slice_minutes;
  let response: Response;
  try {
    response = await fetchImpl(`${baseUrl.replace(/\/+$/, "")}/command`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  } catch (error) {
    throw new CommandRejectedError(
      `command endpoint unreachable: ${error instanceof Error ? error.message : String(error)}`,
    );
  }
  let payload: unknown = null;
  try {
    payload = await response.json();
  } catch {
    /* handled below via status */
  }
  if (!response.ok) {
    const message =
      typeof payload === "object" && payload !== null && "error" in payload
        ? String((payload as { error: unknown }).error)
        : `HTTP ${response.status}`;
    throw new CommandRejectedError(message);
  }
  return parseCommandAck(payload);
}

/**
 * Full toggle flow driving the reducer: validate, send, dispatch the ack or
 * the inline rejection. Returns true when the command was acknowledged.
 */
export async function toggleSegmentMode(
  baseUrl: string,
  dispatch: (action: ViewAction) => void,
  mode: string,
  slice?: number,
  fetchImpl: typeof fetch = fetch,
): Promise<boolean> {
  let selection: ModeSelection;
  try {
    selection = validateModeRequest(mode, slice);
  } catch (error) {
    dispatch({
      kind: "command-rejected",
      message: error instanceof Error ? error.message : String(error),
    });
    return false;
  }
  dispatch({ kind: "command-sent", request: selection });
  try {
    const ack = await sendModeCommand(baseUrl, selection, fetchImpl);
    dispatch({ kind: "command-ack", ack });
    return true;
  } catch (error) {
    dispatch({
      kind: "command-rejected",
      message: error instanceof Error ? error.message : String(error),
    });
    return false;
  }
}
