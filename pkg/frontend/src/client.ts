/**
 * Feed subscription client: fetch-streamed SSE with reconnect and resume.
 *
 * Built on `fetch` + ReadableStream rather than `EventSource` so the same
 * code runs in browsers and in Node test processes, and so the resume header
 * can be set explicitly. Lifecycle per connection:
 *
 *   connect (Last-Event-ID when something was seen) -> dispatch frames in
 *   arrival order -> on loss: mark stale, retry with capped exponential
 *   backoff, resuming after the last seen sequence number. A terminal `end`
 *   frame stops the client for good.
 *
 * Frames that fail schema validation are dropped (counted, never dispatched);
 * everything the reducer sees went through the whitelist parser.
 */

import { parseFeedEvent } from "./events.js";
import { SseDecoder } from "./sse.js";
import { actionForFeedEvent, type ViewAction } from "./state.js";

export interface FeedClientOptions {
  /** Initial reconnect delay (doubles per attempt). Default 500 ms. */
  readonly retryDelayMs?: number;
  /** Backoff cap. Default 5000 ms. */
  readonly maxRetryDelayMs?: number;
  /** Resume point to start from (seq of last applied event). Default -1. */
  readonly initialLastEventId?: number;
  /** Injection point for tests. Defaults to the global fetch. */
  readonly fetchImpl?: typeof fetch;
}

export class FeedClient {
  readonly baseUrl: string;
  private readonly dispatch: (action: ViewAction) => void;
  private readonly retryDelayMs: number;
  private readonly maxRetryDelayMs: number;
  private readonly fetchImpl: typeof fetch;
  private controller: AbortController | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private attempts = 0;
  private stopped = false;
  private ended = false;
  /** Last numeric `id:` seen on the wire; the resume point. */
  lastEventId: number;
  /** Frames dropped because they failed schema validation. */
  rejectedFrames = 0;

  constructor(
    baseUrl: string,
    dispatch: (action: ViewAction) => void,
    options: FeedClientOptions = {},
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.dispatch = dispatch;
    this.retryDelayMs = options.retryDelayMs ?? 500;
    this.maxRetryDelayMs = options.maxRetryDelayMs ?? 5000;
    this.lastEventId = options.initialLastEventId ?? -1;
    this.fetchImpl = options.fetchImpl ?? fetch;
  }

  start(): void {
    if (this.stopped || this.ended || this.controller !== null) return;
    void this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
      this.retryTimer = null;
    }
    this.controller?.abort();
    this.controller = null;
  }

  get isEnded(): boolean {
    return this.ended;
  }

  private async connect(): Promise<void> {
    this.controller = new AbortController();
    this.dispatch({ kind: "connecting" });
    try {
      const headers: Record<string, string> = { Accept: "text/event-stream" };
      if (this.lastEventId >= 0) headers["Last-Event-ID"] = String(this.lastEventId);
      const response = await this.fetchImpl(`${this.baseUrl}/feed`, {
        headers,
        signal: this.controller.signal,
      });
      if (!response.ok || response.body === null) {
        throw new Error(`feed request failed: HTTP ${response.status}`);
      }
      this.attempts = 0;
      this.dispatch({ kind: "open" });
      const decoder = new SseDecoder();
      const reader = response.body.getReader();
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        for (const frame of decoder.push(value)) this.handleFrame(frame.event, frame.id, frame.data);
        if (this.ended) {
          await reader.cancel().catch(() => undefined);
          break;
        }
      }
    } catch {
      // fall through to the shared close handling below
    }
    this.controller = null;
    if (this.ended) return; // terminal end already dispatched
    if (this.stopped) {
      this.dispatch({ kind: "disconnected" });
      return;
    }
    this.dispatch({ kind: "disconnected" });
    this.scheduleReconnect();
  }

  private handleFrame(eventName: string, id: string | null, data: string): void {
    if (id !== null) {
      const numeric = Number.parseInt(id, 10);
      if (Number.isInteger(numeric)) this.lastEventId = Math.max(this.lastEventId, numeric);
    }
    let action: ViewAction;
    try {
      action = actionForFeedEvent(parseFeedEvent(eventName, data));
    } catch {
      this.rejectedFrames += 1;
      return;
    }
    if (action.kind === "end") this.ended = true;
    this.dispatch(action);
  }

  private scheduleReconnect(): void {
    this.attempts += 1;
    const delay = Math.min(
      this.retryDelayMs * 2 ** (this.attempts - 1),
      this.maxRetryDelayMs,
    );
    this.retryTimer = setTimeout(() => {
      this.retryTimer = null;
      if (!this.stopped && !this.ended) void this.connect();
    }, delay);
  }
}
