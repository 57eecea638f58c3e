"""Concurrent TCP ingestion of device reports.

One thread per connection. Each valid frame is persisted (idempotently on
(driver_id, seq)), acked, and published to the live feed; new crashes are
handed to the dispatcher exactly once. Invalid frames get an error frame
and are not persisted. Every accepted/rejected frame is logged as one
JSON line on stderr.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
import time
from typing import Callable, Optional

from .livefeed import LiveFeed
from .store import EventRecord, EventStore
from .wire import (
    DEFAULT_WIRE_PORT,
    ParseError,
    ValidationError,
    VersionError,
    decode_report,
    encode_ack,
    encode_error,
)

log = logging.getLogger("roadwatch.ingest")

MAX_FRAME_BYTES = 1 << 20
_READ_TICK_S = 0.5


def record_to_dict(r: EventRecord) -> dict:
    """Canonical JSON-ready form of an event record (epoch-ms ints)."""
    return {
        "event_id": r.event_id,
        "received_at": r.received_at,
        "v": r.v,
        "seq": r.seq,
        "driver_id": r.driver_id,
        "type": r.type,
        "t": r.t,
        "lat": r.lat,
        "lon": r.lon,
        "speed_kmh": r.speed_kmh,
        "max_axis": r.max_axis,
        "g_force": r.g_force,
        "magnitude_pct": r.magnitude_pct,
        "collision": r.collision,
        "flagged_unknown_driver": r.flagged_unknown_driver,
    }


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        server: IngestionServer = self.server.owner  # type: ignore[attr-defined]
        self.connection.settimeout(_READ_TICK_S)
        buf = b""
        while not server.stopping.is_set():
            try:
                chunk = self.connection.recv(65536)
            except socket.timeout:
                continue
            except OSError:
                break
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                if not self._handle_frame(server, line):
                    return
            if len(buf) > MAX_FRAME_BYTES:
                self._reply(encode_error("frame"))
                return

    def _reply(self, data: bytes) -> bool:
        try:
            self.wfile.write(data)
            return True
        except OSError:
            return False

    def _handle_frame(self, server: "IngestionServer", line: bytes) -> bool:
        """Process one frame; returns False when the connection must close."""
        try:
            report = decode_report(line)
        except VersionError as e:
            server.log_frame("rejected", err=e.field, seq=e.seq, detail=str(e))
            self._reply(encode_error(e.field, e.seq))
            return False
        except ValidationError as e:
            server.log_frame("rejected", err=e.field, seq=e.seq, detail=str(e))
            return self._reply(encode_error(e.field, e.seq))
        except ParseError as e:
            server.log_frame("rejected", err="frame", detail=str(e))
            return self._reply(encode_error("frame"))

        flagged = server.store.get_driver(report.driver_id) is None
        try:
            event_id, created = server.store.insert_event(
                report, server.now_ms(), flagged_unknown_driver=flagged
            )
        except Exception as e:
            # no ack: the client keeps the report and retries
            server.log_frame(
                "store_error", driver_id=report.driver_id, seq=report.seq, detail=str(e)
            )
            return True
        if not self._reply(encode_ack(report.seq)):
            return False
        if created:
            record = server.store.event_by_id(event_id)
            if record is not None:
                server.livefeed.publish(record_to_dict(record))
            if report.type == "crash" and server.on_crash is not None:
                server.on_crash(event_id)
        server.log_frame(
            "accepted",
            driver_id=report.driver_id,
            seq=report.seq,
            type=report.type,
            event_id=event_id,
            created=created,
        )
        return True


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class IngestionServer:
    def __init__(
        self,
        store: EventStore,
        livefeed: LiveFeed,
        on_crash: Optional[Callable[[int], None]] = None,
        host: str = "127.0.0.1",
        port: int = DEFAULT_WIRE_PORT,
        now_ms: Callable[[], int] = lambda: int(time.time() * 1000),
    ):
        self.store = store
        self.livefeed = livefeed
        self.on_crash = on_crash
        self.now_ms = now_ms
        self.stopping = threading.Event()
        self._tcp = _TcpServer((host, port), _Handler, bind_and_activate=True)
        self._tcp.owner = self  # type: ignore[attr-defined]
        self._thread: Optional[threading.Thread] = None

    @property
    def port(self) -> int:
        return self._tcp.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self._tcp.serve_forever, name="ingest", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self.stopping.set()
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None

    def log_frame(self, frame: str, **fields) -> None:
        log.info("%s", json.dumps({"frame": frame, **fields}, default=str))
