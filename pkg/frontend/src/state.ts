// Console view state and its transitions. Pure functions: the DOM layer
// renders whatever is here, nothing more (no client-side aggregation).

import type { EventRecord, EventType } from "./types.js";

export const DEFAULT_WINDOW_MS = 24 * 3600 * 1000;
export const EVENT_CAP = 500;

export interface ConsoleViewState {
  mode: "live" | "range";
  from: number;
  to: number;
  typeFilter: EventType | null;
  selectedId: number | null;
  events: EventRecord[]; // newest first
  gapsMissed: number;
}

export function initialState(nowMs: number): ConsoleViewState {
  return {
    mode: "live",
    from: nowMs - DEFAULT_WINDOW_MS,
    to: nowMs,
    typeFilter: null,
    selectedId: null,
    events: [],
    gapsMissed: 0,
  };
}

function byRecency(a: EventRecord, b: EventRecord): number {
  return b.t - a.t || b.event_id - a.event_id;
}

/** Merge incoming records, deduping on event_id; newest first, capped. */
export function mergeEvents(
  state: ConsoleViewState,
  incoming: EventRecord[],
  cap: number = EVENT_CAP,
): ConsoleViewState {
  const seen = new Map<number, EventRecord>();
  for (const e of state.events) seen.set(e.event_id, e);
  for (const e of incoming) seen.set(e.event_id, e);
  const events = [...seen.values()].sort(byRecency).slice(0, cap);
  return { ...state, events };
}

export function replaceEvents(state: ConsoleViewState, records: EventRecord[]): ConsoleViewState {
  return { ...state, events: [...records].sort(byRecency).slice(0, EVENT_CAP) };
}

export function withRange(state: ConsoleViewState, from: number, to: number): ConsoleViewState {
  if (from > to) {
    throw new RangeError(`from ${from} is after to ${to}`);
  }
  return { ...state, mode: "range", from, to };
}

export function withLiveMode(state: ConsoleViewState, nowMs: number): ConsoleViewState {
  return {
    ...state,
    mode: "live",
    from: nowMs - DEFAULT_WINDOW_MS,
    to: nowMs,
  };
}

export function withTypeFilter(
  state: ConsoleViewState,
  typeFilter: EventType | null,
): ConsoleViewState {
  return { ...state, typeFilter };
}

export function withSelection(state: ConsoleViewState, id: number | null): ConsoleViewState {
  return { ...state, selectedId: id };
}

export function noteGap(state: ConsoleViewState, n: number): ConsoleViewState {
  return { ...state, gapsMissed: state.gapsMissed + n };
}

export function visibleEvents(state: ConsoleViewState): EventRecord[] {
  if (state.typeFilter === null) return state.events;
  return state.events.filter((e) => e.type === state.typeFilter);
}

export function selectedEvent(state: ConsoleViewState): EventRecord | null {
  if (state.selectedId === null) return null;
  return state.events.find((e) => e.event_id === state.selectedId) ?? null;
}
