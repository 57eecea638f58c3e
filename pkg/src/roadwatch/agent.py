"""The software device agent: detect, log locally, then deliver.

Every detected event is appended to the black box before the first
transmission attempt, so nothing ever reaches the wire that is not
already on disk. Delivery is store-and-forward: unacked entries survive
in the black box and are re-sent by later flushes, relying on the
server's (driver_id, seq) idempotency.
"""

from __future__ import annotations

import socket
import time
from dataclasses import dataclass
from typing import Optional

from .blackbox import BlackBox
from .detection import DetectionConfig, run_detector
from .traces import TraceFile
from .wire import Ack, decode_server_frame, encode_report, report_from_event

DEFAULT_SEND_ATTEMPTS = 3
DEFAULT_RETRY_DELAY_S = 0.05
DEFAULT_ACK_TIMEOUT_S = 5.0


class LinkError(Exception):
    pass


@dataclass
class RunReport:
    detected: int = 0
    acked: int = 0
    retransmissions: int = 0

    @property
    def all_acked(self) -> bool:
        return self.acked == self.detected


class ServerLink:
    """One framed connection to the ingestion server, reconnecting on demand."""

    def __init__(self, host: str, port: int, ack_timeout_s: float = DEFAULT_ACK_TIMEOUT_S):
        self.host = host
        self.port = port
        self.ack_timeout_s = ack_timeout_s
        self._sock: Optional[socket.socket] = None
        self._buf = b""

    def _connect(self) -> socket.socket:
        if self._sock is None:
            try:
                self._sock = socket.create_connection((self.host, self.port), timeout=self.ack_timeout_s)
            except OSError as e:
                raise LinkError(f"connect to {self.host}:{self.port} failed: {e}") from None
            self._buf = b""
        return self._sock

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            finally:
                self._sock = None

    def _read_line(self, sock: socket.socket) -> bytes:
        while b"\n" not in self._buf:
            try:
                chunk = sock.recv(65536)
            except OSError as e:
                raise LinkError(f"recv failed: {e}") from None
            if not chunk:
                raise LinkError("connection closed by server")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def deliver(self, frame: bytes, seq: int) -> bool:
        """Send one frame and wait for its reply; True iff acked with seq."""
        sock = self._connect()
        try:
            sock.sendall(frame)
        except OSError as e:
            self.close()
            raise LinkError(f"send failed: {e}") from None
        try:
            reply = decode_server_frame(self._read_line(sock))
        except LinkError:
            self.close()
            raise
        except Exception as e:
            self.close()
            raise LinkError(f"bad server reply: {e}") from None
        return isinstance(reply, Ack) and reply.ack == seq


def _deliver_with_retries(
    link: ServerLink,
    frame: bytes,
    seq: int,
    attempts: int,
    retry_delay_s: float,
    run: RunReport,
) -> bool:
    for attempt in range(1, attempts + 1):
        if attempt > 1:
            run.retransmissions += 1
            time.sleep(retry_delay_s)
        try:
            if link.deliver(frame, seq):
                return True
            return False  # server rejected the frame; retrying won't help
        except LinkError:
            continue
    return False


def replay(
    trace: TraceFile,
    driver_id: str,
    cfg: DetectionConfig,
    host: str,
    port: int,
    blackbox: BlackBox,
    time_scale: float = 0.0,
    send_attempts: int = DEFAULT_SEND_ATTEMPTS,
    retry_delay_s: float = DEFAULT_RETRY_DELAY_S,
) -> RunReport:
    """Detect events in the trace, black-box each one, then deliver in order.

    time_scale is a speed multiplier for pacing between events (1.0 means
    real time, 10.0 means ten times faster); 0 replays as fast as possible.
    A final pass re-sends anything still unacked before returning, so an
    endpoint that was down for part of the run can still catch up.
    """
    events = run_detector(trace.samples, trace.fixes, driver_id, cfg)
    run = RunReport(detected=len(events))
    link = ServerLink(host, port)
    acked: set[int] = set()
    try:
        prev_t = None
        for event in events:
            if time_scale > 0 and prev_t is not None and event.t > prev_t:
                time.sleep((event.t - prev_t) / 1000.0 / time_scale)
            prev_t = event.t
            seq = blackbox.next_seq()
            report = report_from_event(event, seq, cfg.full_scale_g)
            blackbox.append(report)
            frame = encode_report(report)
            if _deliver_with_retries(link, frame, seq, send_attempts, retry_delay_s, run):
                acked.add(seq)
                blackbox.advance(seq)
        # catch-up pass for anything that failed mid-run
        for entry in blackbox.unacked():
            if entry.log_seq in acked:
                continue
            frame = encode_report(entry.report)
            run.retransmissions += 1
            try:
                if link.deliver(frame, entry.log_seq):
                    acked.add(entry.log_seq)
                    blackbox.advance(entry.log_seq)
            except LinkError:
                break
    finally:
        link.close()
    run.acked = len(acked)
    return run


def flush_unacked(host: str, port: int, blackbox: BlackBox) -> int:
    """Re-send unacked black-box entries in log order; returns newly acked count.

    An unreachable endpoint leaves everything unchanged and returns 0. No
    connection is opened when there is nothing to send.
    """
    entries = blackbox.unacked()
    if not entries:
        return 0
    link = ServerLink(host, port)
    newly = 0
    try:
        for entry in entries:
            frame = encode_report(entry.report)
            if not link.deliver(frame, entry.log_seq):
                break
            blackbox.advance(entry.log_seq)
            newly += 1
    except LinkError:
        return newly
    finally:
        link.close()
    return newly
