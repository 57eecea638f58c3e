// Thin typed client for the analytics API. Every number the console
// renders comes straight out of these responses.

import type {
  Bucket,
  BucketCount,
  DriverRecord,
  EventRecord,
  EventType,
  NotificationRecord,
  SpeedStats,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail: string,
  ) {
    super(detail);
  }
}

export interface EventQuery {
  from?: number;
  to?: number;
  type?: EventType;
}

type FetchLike = (url: string) => Promise<{
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}>;

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url) => fetch(url),
  ) {}

  eventsUrl(q: EventQuery = {}): string {
    const params = new URLSearchParams();
    if (q.from !== undefined) params.set("from", String(q.from));
    if (q.to !== undefined) params.set("to", String(q.to));
    if (q.type) params.set("type", q.type);
    const qs = params.toString();
    return `${this.baseUrl}/events${qs ? "?" + qs : ""}`;
  }

  liveUrl(): string {
    return `${this.baseUrl}/live`;
  }

  private async get<T>(url: string): Promise<T> {
    const resp = await this.fetchFn(url);
    if (!resp.ok) {
      let code = "http_error";
      let detail = `GET ${url} -> ${resp.status}`;
      try {
        const body = (await resp.json()) as { code?: string; detail?: string };
        if (body.code) code = body.code;
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the generic detail
      }
      throw new ApiError(resp.status, code, detail);
    }
    return (await resp.json()) as T;
  }

  events(q: EventQuery = {}): Promise<EventRecord[]> {
    return this.get<EventRecord[]>(this.eventsUrl(q));
  }

  speeds(from: number, to: number): Promise<SpeedStats> {
    return this.get<SpeedStats>(`${this.baseUrl}/analytics/speeds?from=${from}&to=${to}`);
  }

  counts(from: number, to: number, bucket: Bucket): Promise<BucketCount[]> {
    return this.get<BucketCount[]>(
      `${this.baseUrl}/analytics/counts?from=${from}&to=${to}&bucket=${bucket}`,
    );
  }

  async driver(driverId: string): Promise<DriverRecord | null> {
    try {
      return await this.get<DriverRecord>(
        `${this.baseUrl}/drivers/${encodeURIComponent(driverId)}`,
      );
    } catch (e) {
      if (e instanceof ApiError && e.status === 404) return null;
      throw e;
    }
  }

  outbox(eventId: number): Promise<NotificationRecord[]> {
    return this.get<NotificationRecord[]>(`${this.baseUrl}/outbox?event_id=${eventId}`);
  }
}
