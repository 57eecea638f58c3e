// Bootstrap: wire the API client, live stream, state, and DOM together.

import { ApiClient } from "./api.js";
import {
  countBars,
  drawBars,
  drawScatter,
  drawSpeeds,
  scatterPoints,
  speedPoints,
} from "./charts.js";
import { parseLocalInput, toLocalInput } from "./format.js";
import { LiveStream } from "./live.js";
import {
  ConsoleViewState,
  initialState,
  mergeEvents,
  noteGap,
  replaceEvents,
  selectedEvent,
  visibleEvents,
  withLiveMode,
  withRange,
  withSelection,
  withTypeFilter,
} from "./state.js";
import { analyticsSummaryHtml, detailHtml, eventTableHtml, statusHtml } from "./render.js";
import type { Bucket, EventType } from "./types.js";

declare global {
  interface Window {
    ROADWATCH_API_BASE?: string;
  }
}

async function resolveApiBase(): Promise<string> {
  if (window.ROADWATCH_API_BASE) return window.ROADWATCH_API_BASE;
  try {
    const resp = await fetch("./config.json");
    if (resp.ok) {
      const cfg = (await resp.json()) as { api_base?: string };
      if (cfg.api_base) return cfg.api_base;
    }
  } catch {
    // no runtime config; fall through to the default
  }
  return "http://127.0.0.1:7081";
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

async function start(): Promise<void> {
  const api = new ApiClient(await resolveApiBase());
  let state: ConsoleViewState = initialState(Date.now());
  let connection = "connecting";

  const list = el<HTMLDivElement>("event-list");
  const detail = el<HTMLDivElement>("event-detail");
  const status = el<HTMLSpanElement>("status");
  const mapCanvas = el<HTMLCanvasElement>("map");
  const speedCanvas = el<HTMLCanvasElement>("speed-chart");
  const countCanvas = el<HTMLCanvasElement>("count-chart");
  const speedSummary = el<HTMLDivElement>("speed-summary");
  const fromInput = el<HTMLInputElement>("from");
  const toInput = el<HTMLInputElement>("to");
  const typeSelect = el<HTMLSelectElement>("type-filter");
  const bucketSelect = el<HTMLSelectElement>("bucket");
  const rangeError = el<HTMLSpanElement>("range-error");

  fromInput.value = toLocalInput(state.from);
  toInput.value = toLocalInput(state.to);

  function redrawList(): void {
    const events = visibleEvents(state);
    list.innerHTML = eventTableHtml(events, state.selectedId);
    status.innerHTML = statusHtml(state.mode, connection, events.length, state.gapsMissed);
    const ctx = mapCanvas.getContext("2d");
    if (ctx) {
      drawScatter(
        ctx,
        scatterPoints(events, mapCanvas.width, mapCanvas.height, state.selectedId),
        mapCanvas.width,
        mapCanvas.height,
      );
    }
  }

  async function redrawDetail(): Promise<void> {
    const event = selectedEvent(state);
    if (!event) {
      detail.innerHTML = `<p class="empty">Select an event.</p>`;
      return;
    }
    const [driver, outbox] = await Promise.all([
      api.driver(event.driver_id),
      event.type === "crash" ? api.outbox(event.event_id) : Promise.resolve([]),
    ]);
    detail.innerHTML = detailHtml(event, driver, outbox);
  }

  async function redrawAnalytics(): Promise<void> {
    const bucket = bucketSelect.value as Bucket;
    const [speeds, counts] = await Promise.all([
      api.speeds(state.from, state.to),
      api.counts(state.from, state.to, bucket),
    ]);
    speedSummary.innerHTML = analyticsSummaryHtml(speeds.count, speeds.mean, speeds.max);
    const sctx = speedCanvas.getContext("2d");
    if (sctx) {
      drawSpeeds(
        sctx,
        speedPoints(speeds.rows, speedCanvas.width, speedCanvas.height),
        speedCanvas.width,
        speedCanvas.height,
      );
    }
    const cctx = countCanvas.getContext("2d");
    if (cctx) {
      drawBars(
        cctx,
        countBars(counts, countCanvas.width, countCanvas.height),
        countCanvas.width,
        countCanvas.height,
      );
    }
  }

  async function refetchEvents(): Promise<void> {
    const records = await api.events({
      from: state.from,
      to: state.to,
      type: state.typeFilter ?? undefined,
    });
    state = state.typeFilter ? mergeEvents(state, records) : replaceEvents(state, records);
    redrawList();
  }

  const live = new LiveStream(api.liveUrl(), {
    onEvent: (e) => {
      if (state.mode !== "live") return;
      state = mergeEvents(state, [e]);
      redrawList();
    },
    onGap: (n) => {
      state = noteGap(state, n);
      void refetchEvents();
    },
    onReconnect: () => {
      if (state.mode === "live") {
        state = withLiveMode(state, Date.now());
        void refetchEvents();
      }
    },
    onStatus: (s) => {
      connection = s;
      redrawList();
    },
  });

  list.addEventListener("click", (ev) => {
    const row = (ev.target as HTMLElement).closest("tr[data-event-id]");
    if (!row) return;
    state = withSelection(state, Number(row.getAttribute("data-event-id")));
    redrawList();
    void redrawDetail();
  });

  el<HTMLButtonElement>("apply-range").addEventListener("click", () => {
    const from = parseLocalInput(fromInput.value);
    const to = parseLocalInput(toInput.value);
    rangeError.textContent = "";
    if (from === null || to === null) {
      rangeError.textContent = "enter both ends of the range";
      return;
    }
    try {
      state = withRange(state, from, to);
    } catch (e) {
      rangeError.textContent = (e as Error).message;
      return;
    }
    void refetchEvents();
    void redrawAnalytics();
  });

  el<HTMLButtonElement>("go-live").addEventListener("click", () => {
    state = withLiveMode(state, Date.now());
    fromInput.value = toLocalInput(state.from);
    toInput.value = toLocalInput(state.to);
    void refetchEvents();
    void redrawAnalytics();
  });

  typeSelect.addEventListener("change", () => {
    const v = typeSelect.value;
    state = withTypeFilter(state, v === "all" ? null : (v as EventType));
    redrawList();
  });

  bucketSelect.addEventListener("change", () => void redrawAnalytics());

  await refetchEvents();
  await redrawAnalytics();
  live.start();
}

void start();
