// Live feed subscription over server-sent events with automatic
// reconnect. After every reconnect the owner is told to run a catch-up
// fetch, because anything persisted during the outage never reaches the
// stream (live semantics: subscribers only see what comes after them).

import type { EventRecord } from "./types.js";

export interface EventSourceLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface LiveHandlers {
  onEvent(e: EventRecord): void;
  /** the server dropped n messages for this slow subscriber */
  onGap?(n: number): void;
  /** stream reopened after an outage; catch up via /events */
  onReconnect?(): void;
  onStatus?(status: "connecting" | "open" | "retrying"): void;
}

export interface LiveOptions {
  factory?: EventSourceFactory;
  baseRetryMs?: number;
  maxRetryMs?: number;
  schedule?: (fn: () => void, ms: number) => unknown;
}

const defaultFactory: EventSourceFactory = (url) =>
  new EventSource(url) as unknown as EventSourceLike;

export class LiveStream {
  private source: EventSourceLike | null = null;
  private retryMs: number;
  private readonly baseRetryMs: number;
  private readonly maxRetryMs: number;
  private readonly factory: EventSourceFactory;
  private readonly schedule: (fn: () => void, ms: number) => unknown;
  private everOpened = false;
  private stopped = false;

  constructor(
    private readonly url: string,
    private readonly handlers: LiveHandlers,
    opts: LiveOptions = {},
  ) {
    this.factory = opts.factory ?? defaultFactory;
    this.baseRetryMs = opts.baseRetryMs ?? 1000;
    this.maxRetryMs = opts.maxRetryMs ?? 30_000;
    this.retryMs = this.baseRetryMs;
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  start(): void {
    this.stopped = false;
    this.connect();
  }

  stop(): void {
    this.stopped = true;
    if (this.source) {
      this.source.close();
      this.source = null;
    }
  }

  private connect(): void {
    if (this.stopped) return;
    this.handlers.onStatus?.("connecting");
    const source = this.factory(this.url);
    this.source = source;
    source.onopen = () => {
      this.retryMs = this.baseRetryMs;
      this.handlers.onStatus?.("open");
      if (this.everOpened) {
        this.handlers.onReconnect?.();
      }
      this.everOpened = true;
    };
    source.onmessage = (ev) => {
      let parsed: unknown;
      try {
        parsed = JSON.parse(ev.data);
      } catch {
        return; // not ours; ignore
      }
      const obj = parsed as Record<string, unknown>;
      if (typeof obj.gap === "number") {
        this.handlers.onGap?.(obj.gap);
        return;
      }
      if (typeof obj.event_id === "number") {
        this.handlers.onEvent(obj as unknown as EventRecord);
      }
    };
    source.onerror = () => {
      source.close();
      if (this.source === source) this.source = null;
      if (this.stopped) return;
      this.handlers.onStatus?.("retrying");
      const delay = this.retryMs;
      this.retryMs = Math.min(this.retryMs * 2, this.maxRetryMs);
      this.schedule(() => this.connect(), delay);
    };
  }
}
