// HTML fragments for the console. String-building keeps this layer
// testable without a browser; main.ts assigns the results to the DOM.

import { collisionLabel, escapeHtml, fmtCoord, fmtG, fmtSpeed, fmtTime } from "./format.js";
import type { DriverRecord, EventRecord, NotificationRecord } from "./types.js";

export function eventRowHtml(e: EventRecord, selected: boolean): string {
  const badge = e.type === "crash" ? "badge crash" : "badge pothole";
  const cls = selected ? "event-row selected" : "event-row";
  const who = escapeHtml(e.driver_id) + (e.flagged_unknown_driver ? " (unregistered)" : "");
  return (
    `<tr class="${cls}" data-event-id="${e.event_id}">` +
    `<td>${fmtTime(e.t)}</td>` +
    `<td><span class="${badge}">${e.type}</span></td>` +
    `<td>${who}</td>` +
    `<td>${fmtCoord(e.lat, e.lon)}</td>` +
    `<td>${fmtSpeed(e.speed_kmh)}</td>` +
    `<td>${fmtG(e.g_force)} ${e.max_axis}</td>` +
    `</tr>`
  );
}

export function eventTableHtml(events: EventRecord[], selectedId: number | null): string {
  if (events.length === 0) {
    return `<p class="empty">No events in this window.</p>`;
  }
  const rows = events.map((e) => eventRowHtml(e, e.event_id === selectedId)).join("");
  return (
    `<table class="events"><thead><tr>` +
    `<th>time</th><th>type</th><th>driver</th><th>location</th>` +
    `<th>speed</th><th>peak</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function detailHtml(
  e: EventRecord,
  driver: DriverRecord | null,
  outbox: NotificationRecord[],
): string {
  const parts = [
    `<h3>#${e.event_id} ${e.type} at ${fmtTime(e.t)}</h3>`,
    `<dl>`,
    `<dt>driver</dt><dd>${driver ? escapeHtml(`${driver.name} - ${driver.car} (${driver.plate})`) : escapeHtml(e.driver_id) + " (unregistered)"}</dd>`,
    `<dt>location</dt><dd>${fmtCoord(e.lat, e.lon)}</dd>`,
    `<dt>last speed</dt><dd>${fmtSpeed(e.speed_kmh)}</dd>`,
    `<dt>impact</dt><dd>${fmtG(e.g_force)} on ${e.max_axis} (${e.magnitude_pct.toFixed(1)}% of full scale)</dd>`,
  ];
  if (e.type === "crash") {
    parts.push(`<dt>collision</dt><dd>${escapeHtml(collisionLabel(e.collision))}</dd>`);
  }
  parts.push(`</dl>`);
  if (e.type === "crash") {
    if (outbox.length === 0) {
      parts.push(`<p class="empty">No notifications recorded yet.</p>`);
    } else {
      const rows = outbox
        .map(
          (n) =>
            `<tr><td>${escapeHtml(n.kind)}</td><td>${escapeHtml(n.to)}</td>` +
            `<td class="status-${n.status}">${n.status} (x${n.attempts})` +
            `${n.reason ? " - " + escapeHtml(n.reason) : ""}</td></tr>`,
        )
        .join("");
      parts.push(
        `<h4>notifications</h4><table class="outbox">` +
          `<thead><tr><th>kind</th><th>to</th><th>status</th></tr></thead>` +
          `<tbody>${rows}</tbody></table>`,
      );
      parts.push(`<p class="message">${escapeHtml(outbox[0].message)}</p>`);
    }
  }
  return parts.join("");
}

export function statusHtml(
  mode: "live" | "range",
  connection: string,
  count: number,
  gaps: number,
): string {
  const gapNote = gaps > 0 ? ` - ${gaps} missed (catching up)` : "";
  return `<span class="mode">${mode}</span> <span class="conn">${escapeHtml(connection)}</span> - ${count} events${gapNote}`;
}

export function analyticsSummaryHtml(count: number, mean: number | null, max: number | null): string {
  if (count === 0) {
    return `<p class="empty">No crashes in this range.</p>`;
  }
  return `<p>${count} crashes - mean speed ${mean === null ? "-" : fmtSpeed(mean)} - max ${max === null ? "-" : fmtSpeed(max)}</p>`;
}
