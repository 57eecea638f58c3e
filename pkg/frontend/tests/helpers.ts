import type { EventRecord, NotificationRecord } from "../src/types.js";

export function makeEvent(overrides: Partial<EventRecord> = {}): EventRecord {
  return {
    event_id: 1,
    received_at: 1000,
    v: 1,
    seq: 1,
    driver_id: "d1",
    type: "pothole",
    t: 5000,
    lat: 32.98,
    lon: -96.75,
    speed_kmh: 45,
    max_axis: "z",
    g_force: 4.2,
    magnitude_pct: 26.25,
    collision: null,
    flagged_unknown_driver: false,
    ...overrides,
  };
}

export function makeCrash(overrides: Partial<EventRecord> = {}): EventRecord {
  return makeEvent({
    type: "crash",
    max_axis: "x",
    g_force: 13,
    magnitude_pct: 81.5,
    collision: "head_on",
    ...overrides,
  });
}

export function makeNotification(
  overrides: Partial<NotificationRecord> = {},
): NotificationRecord {
  return {
    notif_id: 1,
    event_id: 1,
    kind: "voice_911",
    to: "911",
    message: "Automated crash report. Driver: Sam. Location: Main St. Vehicle plate: TX-1. Collision type: head_on. Last known speed: 45 km/h.",
    status: "sent",
    attempts: 1,
    last_attempt_at: 2000,
    reason: null,
    ...overrides,
  };
}

type JsonBody = unknown;

export function fakeFetch(routes: Record<string, JsonBody | (() => JsonBody)>) {
  const calls: string[] = [];
  const fn = async (url: string) => {
    calls.push(url);
    for (const [prefix, body] of Object.entries(routes)) {
      if (url.includes(prefix)) {
        const value = typeof body === "function" ? (body as () => JsonBody)() : body;
        if (
          value !== null &&
          typeof value === "object" &&
          "__status" in (value as Record<string, unknown>)
        ) {
          const v = value as { __status: number; body: unknown };
          return { ok: false, status: v.__status, json: async () => v.body };
        }
        return { ok: true, status: 200, json: async () => value };
      }
    }
    return {
      ok: false,
      status: 404,
      json: async () => ({ status: 404, code: "not_found", detail: url }),
    };
  };
  return { fn, calls };
}
