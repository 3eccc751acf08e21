/**
 * Incremental Server-Sent Events decoder.
 *
 * Transport-agnostic: bytes (or text) go in via `push`, complete frames come
 * out. Implements the SSE wire grammar — `event:`/`data:`/`id:` fields, one
 * optional leading space after the colon, `:` comment lines (the feed's
 * keep-alives), multi-`data:` accumulation joined with newlines, frames
 * dispatched on blank lines, and both LF and CRLF line endings. Fields the
 * protocol doesn't define (e.g. `retry:`) are ignored.
 */

export interface SseFrame {
  /** Event name; "message" when the frame carried no `event:` field. */
  readonly event: string;
  /** Value of the frame's `id:` field, if present. */
  readonly id: string | null;
  readonly data: string;
}

export class SseDecoder {
  private buffer = "";
  private eventName = "";
  private dataLines: string[] = [];
  private id: string | null = null;
  private sawField = false;
  private readonly textDecoder = new TextDecoder("utf-8");

  /** Feed a chunk; returns every frame completed by it. */
  push(chunk: string | Uint8Array): SseFrame[] {
    this.buffer +=
      typeof chunk === "string"
        ? chunk
        : this.textDecoder.decode(chunk, { stream: true });
    const frames: SseFrame[] = [];
    for (;;) {
      const eol = this.buffer.indexOf("\n");
      if (eol === -1) break;
      let line = this.buffer.slice(0, eol);
      this.buffer = this.buffer.slice(eol + 1);
      if (line.endsWith("\r")) line = line.slice(0, -1);
      const frame = this.consumeLine(line);
      if (frame !== null) frames.push(frame);
    }
    return frames;
  }

  private consumeLine(line: string): SseFrame | null {
    if (line === "") {
      if (!this.sawField) return null; // stray blank line
      const frame: SseFrame = {
        event: this.eventName === "" ? "message" : this.eventName,
        id: this.id,
        data: this.dataLines.join("\n"),
      };
      this.eventName = "";
      this.dataLines = [];
      this.id = null;
      this.sawField = false;
      return frame;
    }
    if (line.startsWith(":")) return null; // comment / keep-alive
    const colon = line.indexOf(":");
    const field = colon === -1 ? line : line.slice(0, colon);
    let value = colon === -1 ? "" : line.slice(colon + 1);
    if (value.startsWith(" ")) value = value.slice(1);
    switch (field) {
      case "event":
        this.eventName = value;
        this.sawField = true;
        break;
      case "data":
        this.dataLines.push(value);
        this.sawField = true;
        break;
      case "id":
        if (!value.includes("\0")) this.id = value;
        this.sawField = true;
        break;
      default:
        break; // unknown field: ignored per protocol
    }
    return null;
  }
}
