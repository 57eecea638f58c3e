// Chart geometry as pure data. Drawing is a thin pass over these
// structures so everything countable is testable without a canvas.

import type { BucketCount, EventRecord, SpeedRow } from "./types.js";

export interface ScatterPoint {
  x: number;
  y: number;
  kind: "crash" | "pothole";
  eventId: number;
  selected: boolean;
}

export interface LinePoint {
  x: number;
  y: number;
  eventId: number;
  speed: number;
}

export interface Bar {
  x: number;
  y: number;
  w: number;
  h: number;
  kind: "crash" | "pothole";
  bucketStart: number;
}

const PAD = 24;

function span(min: number, max: number): number {
  return max - min || 1e-9;
}

/** Plain lat/lon scatter, padded to the canvas; no map tiles needed. */
export function scatterPoints(
  events: EventRecord[],
  width: number,
  height: number,
  selectedId: number | null = null,
): ScatterPoint[] {
  if (events.length === 0) return [];
  const lats = events.map((e) => e.lat);
  const lons = events.map((e) => e.lon);
  const latMin = Math.min(...lats);
  const latMax = Math.max(...lats);
  const lonMin = Math.min(...lons);
  const lonMax = Math.max(...lons);
  const w = width - 2 * PAD;
  const h = height - 2 * PAD;
  return events.map((e) => ({
    x: PAD + ((e.lon - lonMin) / span(lonMin, lonMax)) * w,
    y: PAD + (1 - (e.lat - latMin) / span(latMin, latMax)) * h,
    kind: e.type,
    eventId: e.event_id,
    selected: e.event_id === selectedId,
  }));
}

/** Crash speeds over time; one point per API row. */
export function speedPoints(rows: SpeedRow[], width: number, height: number): LinePoint[] {
  if (rows.length === 0) return [];
  const ts = rows.map((r) => r.t);
  const tMin = Math.min(...ts);
  const tMax = Math.max(...ts);
  const vMax = Math.max(...rows.map((r) => r.speed_kmh), 1);
  const w = width - 2 * PAD;
  const h = height - 2 * PAD;
  return rows.map((r) => ({
    x: PAD + ((r.t - tMin) / span(tMin, tMax)) * w,
    y: PAD + (1 - r.speed_kmh / vMax) * h,
    eventId: r.event_id,
    speed: r.speed_kmh,
  }));
}

/** Paired crash/pothole bars, one pair per bucket from the API. */
export function countBars(buckets: BucketCount[], width: number, height: number): Bar[] {
  if (buckets.length === 0) return [];
  const maxCount = Math.max(...buckets.map((b) => Math.max(b.crashes, b.potholes)), 1);
  const w = width - 2 * PAD;
  const h = height - 2 * PAD;
  const slot = w / buckets.length;
  const barW = Math.max(2, Math.min(24, slot * 0.35));
  const bars: Bar[] = [];
  buckets.forEach((b, i) => {
    const cx = PAD + slot * i + slot / 2;
    for (const [kind, count, off] of [
      ["crash", b.crashes, -barW] as const,
      ["pothole", b.potholes, 2] as const,
    ]) {
      const bh = (count / maxCount) * h;
      bars.push({
        x: cx + off - 1,
        y: PAD + (h - bh),
        w: barW,
        h: bh,
        kind,
        bucketStart: b.bucket_start,
      });
    }
  });
  return bars;
}

export const CRASH_COLOR = "#d64545";
export const POTHOLE_COLOR = "#2f7dd1";

interface Ctx2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fillStyle: string | unknown;
  strokeStyle: string | unknown;
  lineWidth: number;
}

export function drawScatter(ctx: Ctx2D, pts: ScatterPoint[], width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  for (const p of pts) {
    ctx.beginPath();
    ctx.fillStyle = p.kind === "crash" ? CRASH_COLOR : POTHOLE_COLOR;
    ctx.arc(p.x, p.y, p.selected ? 8 : p.kind === "crash" ? 6 : 4, 0, Math.PI * 2);
    ctx.fill();
    if (p.selected) {
      ctx.strokeStyle = "#222";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
  }
}

export function drawSpeeds(ctx: Ctx2D, pts: LinePoint[], width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  if (pts.length === 0) return;
  ctx.strokeStyle = CRASH_COLOR;
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  pts.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
  ctx.stroke();
  for (const p of pts) {
    ctx.beginPath();
    ctx.fillStyle = CRASH_COLOR;
    ctx.arc(p.x, p.y, 3.5, 0, Math.PI * 2);
    ctx.fill();
  }
}

export function drawBars(ctx: Ctx2D, bars: Bar[], width: number, height: number): void {
  ctx.clearRect(0, 0, width, height);
  for (const b of bars) {
    ctx.fillStyle = b.kind === "crash" ? CRASH_COLOR : POTHOLE_COLOR;
    ctx.fillRect(b.x, b.y, b.w, b.h);
  }
}
