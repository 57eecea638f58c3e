"""Read-only HTTP API for the operator console.

All writes enter through the wire protocol or the CLI; this surface only
queries the store and streams the live feed. Timestamps in responses are
epoch-ms integers. Bodies are JSON with compact separators so identical
queries yield identical bytes.
"""

from __future__ import annotations

import json
import queue
import select
import socket
import threading
import time
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional
from urllib.parse import parse_qs, urlparse

from .ingest import record_to_dict
from .livefeed import LiveFeed
from .store import EventStore, NotificationRecord, RangeError

DEFAULT_API_PORT = 7081
DEFAULT_WINDOW_MS = 24 * 3600 * 1000
ROW_CAP = 10_000
HEARTBEAT_S = 15.0
BUCKETS_MS = {
    "hour": 3600 * 1000,
    "day": 24 * 3600 * 1000,
    "week": 7 * 24 * 3600 * 1000,
}

_LIVE_TICK_S = 0.25


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.code = code
        self.detail = detail


def parse_time(value: str) -> int:
    """Accepts epoch milliseconds or RFC-3339; returns epoch ms."""
    try:
        return int(value)
    except ValueError:
        pass
    text = value.replace("Z", "+00:00") if value.endswith("Z") else value
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise ApiError(400, "bad_timestamp", f"cannot parse timestamp {value!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


def notification_to_dict(n: NotificationRecord) -> dict:
    return {
        "notif_id": n.notif_id,
        "event_id": n.event_id,
        "kind": n.kind,
        "to": n.to,
        "message": n.message,
        "status": n.status,
        "attempts": n.attempts,
        "last_attempt_at": n.last_attempt_at,
        "reason": n.reason,
    }


def dump_json(body) -> bytes:
    return json.dumps(body, separators=(",", ":"), allow_nan=False).encode()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # default stderr chatter off
        pass

    @property
    def api(self) -> "AnalyticsApi":
        return self.server.owner  # type: ignore[attr-defined]

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self._cors()
        self.send_header("Access-Control-Allow-Methods", "GET, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self) -> None:
        url = urlparse(self.path)
        params = {k: v[-1] for k, v in parse_qs(url.query).items()}
        try:
            if url.path == "/events":
                self._json(200, self._events(params))
            elif url.path == "/analytics/speeds":
                self._json(200, self._speeds(params))
            elif url.path == "/analytics/counts":
                self._json(200, self._counts(params))
            elif url.path.startswith("/drivers/"):
                self._json(200, self._driver(url.path[len("/drivers/"):]))
            elif url.path == "/outbox":
                self._json(200, self._outbox(params))
            elif url.path == "/live":
                self._live()
            else:
                raise ApiError(404, "not_found", f"no route {url.path}")
        except ApiError as e:
            self._json(e.status, {"status": e.status, "code": e.code, "detail": e.detail})
        except RangeError as e:
            self._json(400, {"status": 400, "code": "bad_range", "detail": str(e)})
        except (BrokenPipeError, ConnectionResetError):
            self.close_connection = True
        except Exception as e:
            self._json(500, {"status": 500, "code": "internal", "detail": str(e)})

    def do_POST(self) -> None:
        self._json(405, {"status": 405, "code": "method_not_allowed", "detail": "read-only API"})

    # -- routes ----------------------------------------------------------

    def _window(self, params: dict) -> tuple[int, int]:
        now = self.api.now_ms()
        to = parse_time(params["to"]) if "to" in params else now
        frm = parse_time(params["from"]) if "from" in params else now - DEFAULT_WINDOW_MS
        if frm > to:
            raise ApiError(400, "bad_range", f"from {frm} > to {to}")
        return frm, to

    def _events(self, params: dict) -> list:
        frm, to = self._window(params)
        type_filter = params.get("type")
        if type_filter is not None and type_filter not in ("crash", "pothole"):
            raise ApiError(400, "bad_type", f"unknown type {type_filter!r}")
        if self.api.store.count_events(frm, to, type_filter) > self.api.row_cap:
            raise ApiError(413, "too_many_rows", f"result exceeds {self.api.row_cap} rows")
        return [record_to_dict(r) for r in self.api.store.query_events(frm, to, type_filter)]

    def _speeds(self, params: dict) -> dict:
        frm, to = self._window(params)
        stats = self.api.store.speed_stats(frm, to)
        return {
            "count": stats.count,
            "mean": stats.mean,
            "max": stats.max,
            "rows": [
                {"event_id": r.event_id, "t": r.t, "speed_kmh": r.speed_kmh}
                for r in stats.rows
            ],
        }

    def _counts(self, params: dict) -> list:
        frm, to = self._window(params)
        bucket = params.get("bucket", "hour")
        if bucket not in BUCKETS_MS:
            raise ApiError(400, "bad_bucket", f"bucket must be one of {sorted(BUCKETS_MS)}")
        return [
            {"bucket_start": b.bucket_start, "crashes": b.crashes, "potholes": b.potholes}
            for b in self.api.store.counts_by_bucket(frm, to, BUCKETS_MS[bucket])
        ]

    def _driver(self, driver_id: str) -> dict:
        d = self.api.store.get_driver(driver_id)
        if d is None:
            raise ApiError(404, "not_found", f"no driver {driver_id!r}")
        return {
            "driver_id": d.driver_id,
            "name": d.name,
            "car": d.car,
            "plate": d.plate,
            "emergency_contact_name": d.emergency_contact_name,
            "emergency_contact_phone": d.emergency_contact_phone,
        }

    def _outbox(self, params: dict) -> list:
        if "event_id" in params:
            try:
                event_id = int(params["event_id"])
            except ValueError:
                raise ApiError(400, "bad_event_id", "event_id must be an integer") from None
            rows = self.api.store.notifications_for_event(event_id)
        else:
            rows = self.api.store.all_notifications()
        return [notification_to_dict(n) for n in rows]

    # -- plumbing --------------------------------------------------------

    def _cors(self) -> None:
        self.send_header("Access-Control-Allow-Origin", self.api.cors_origin)

    def _json(self, status: int, body) -> None:
        data = dump_json(body)
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        try:
            self.wfile.write(data)
        except (BrokenPipeError, ConnectionResetError):
            self.close_connection = True

    def _live(self) -> None:
        """Server-sent event stream of records persisted after subscription."""
        api = self.api
        sub = api.livefeed.subscribe()
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "text/event-stream")
        self.send_header("Cache-Control", "no-cache")
        self.send_header("Connection", "close")
        self.end_headers()
        self.close_connection = True
        try:
            self.wfile.write(b"retry: 3000\n\n")
            self.wfile.flush()
            last_beat = time.monotonic()
            while not api.stopping.is_set():
                # a read-side event on a GET stream means the client went away
                readable, _, _ = select.select([self.connection], [], [], 0)
                if readable and self.connection.recv(1, socket.MSG_PEEK) == b"":
                    break
                try:
                    msg = sub.get(timeout=_LIVE_TICK_S)
                except queue.Empty:
                    msg = None
                gap = sub.take_gap()
                if gap:
                    self.wfile.write(b"data: " + dump_json({"gap": gap}) + b"\n\n")
                if msg is not None:
                    self.wfile.write(b"data: " + dump_json(msg) + b"\n\n")
                    self.wfile.flush()
                if time.monotonic() - last_beat >= api.heartbeat_s:
                    self.wfile.write(b": hb\n\n")
                    self.wfile.flush()
                    last_beat = time.monotonic()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            api.livefeed.unsubscribe(sub)


class _HttpServer(ThreadingHTTPServer):
    allow_reuse_address = True
    daemon_threads = True


class AnalyticsApi:
    def __init__(
        self,
        store: EventStore,
        livefeed: LiveFeed,
        host: str = "127.0.0.1",
        port: int = DEFAULT_API_PORT,
        cors_origin: str = "*",
        heartbeat_s: float = HEARTBEAT_S,
        row_cap: int = ROW_CAP,
        now_ms: Callable[[], int] = lambda: int(time.time() * 1000),
    ):
        self.store = store
        self.livefeed = livefeed
        self.cors_origin = cors_origin
        self.heartbeat_s = heartbeat_s
        self.row_cap = row_cap
        self.now_ms = now_ms
        self.stopping = threading.Event()
        self._http = _HttpServer((host, port), _Handler)
        self._http.owner = self  # type: ignore[attr-defined]
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._http.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._http.serve_forever, name="api", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.stopping.set()
        self._http.shutdown()
        self._http.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None
