export function fmtTime(ms: number): string {
  return new Date(ms).toISOString().replace("T", " ").slice(0, 19) + "Z";
}

export function fmtCoord(lat: number, lon: number): string {
  return `${lat.toFixed(5)},${lon.toFixed(5)}`;
}

export function fmtSpeed(kmh: number): string {
  return `${Number(kmh.toFixed(1))} km/h`;
}

export function fmtG(g: number): string {
  return `${Number(g.toFixed(2))} G`;
}

export function collisionLabel(collision: string | null): string {
  if (!collision) return "-";
  return collision.replace(/_/g, " ");
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** datetime-local input value (UTC) -> epoch ms; empty -> null */
export function parseLocalInput(value: string): number | null {
  if (!value) return null;
  const ms = Date.parse(value.endsWith("Z") ? value : value + "Z");
  return Number.isNaN(ms) ? null : ms;
}

export function toLocalInput(ms: number): string {
  return new Date(ms).toISOString().slice(0, 16);
}
