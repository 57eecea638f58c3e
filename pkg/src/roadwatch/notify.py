"""Crash notification fan-out: 911 call, contact call, contact text.

Every crash produces exactly three outbox rows, created atomically before
any delivery attempt, so the outbox is the authoritative record of what
the system tried to send. Telephony is pluggable: a deterministic mock
for desk use, an HTTP gateway for real deployments.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable, Optional, Protocol

from .geocode import GeocodeResult, fallback_address
from .store import DriverRecord, EventRecord, EventStore, NotificationRecord

log = logging.getLogger("roadwatch.notify")

NOTIFICATION_KINDS = ("voice_911", "voice_contact", "sms_contact")
NO_CONTACT_REASON = "no contact on file"

MESSAGE_TEMPLATE = (
    "Automated crash report. Driver: {name}. Location: {address}. "
    "Vehicle plate: {plate}. Collision type: {collision}. "
    "Last known speed: {speed} km/h."
)


class TelephonyError(Exception):
    pass


class Telephony(Protocol):
    def call(self, to: str, message: str) -> None: ...
    def text(self, to: str, message: str) -> None: ...


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    base_s: float = 1.0
    factor: float = 2.0
    cap_s: float = 30.0

    def delay_s(self, failed_attempts: int) -> float:
        return min(self.base_s * self.factor ** (failed_attempts - 1), self.cap_s)


class MockTelephony:
    """Records every call/text; can be scripted to fail the next N attempts."""

    def __init__(self):
        self._lock = threading.Lock()
        self.sent: list[tuple[str, str, str]] = []  # (channel, to, message)
        self._fail_remaining = 0

    def fail_next(self, n: int) -> None:
        with self._lock:
            self._fail_remaining = n

    def _attempt(self, channel: str, to: str, message: str) -> None:
        with self._lock:
            if self._fail_remaining > 0:
                self._fail_remaining -= 1
                raise TelephonyError("scripted failure")
            self.sent.append((channel, to, message))

    def call(self, to: str, message: str) -> None:
        self._attempt("call", to, message)

    def text(self, to: str, message: str) -> None:
        self._attempt("text", to, message)


class HttpTelephony:
    """POSTs ``{"to": ..., "message": ...}`` to ``<base_url>/calls`` or ``/texts``."""

    def __init__(self, base_url: str, token: str = "", timeout_s: float = 5.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout_s = timeout_s

    def _post(self, path: str, to: str, message: str) -> None:
        body = json.dumps({"to": to, "message": message}).encode()
        req = urllib.request.Request(
            f"{self.base_url}{path}", data=body, method="POST",
            headers={"Content-Type": "application/json"},
        )
        if self.token:
            req.add_header("Authorization", f"Bearer {self.token}")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                if not 200 <= resp.status < 300:
                    raise TelephonyError(f"gateway returned {resp.status}")
        except TelephonyError:
            raise
        except Exception as e:
            raise TelephonyError(str(e)) from None

    def call(self, to: str, message: str) -> None:
        self._post("/calls", to, message)

    def text(self, to: str, message: str) -> None:
        self._post("/texts", to, message)


def _fmt_speed(speed_kmh: float) -> str:
    return f"{speed_kmh:g}"


def compose_emergency_message(
    event: EventRecord, driver: Optional[DriverRecord], address: str
) -> str:
    """Deterministic crash message with the driver name, address, and plate."""
    name = driver.name if driver else "unregistered driver"
    plate = driver.plate if driver else "unknown"
    return MESSAGE_TEMPLATE.format(
        name=name,
        address=address,
        plate=plate,
        collision=event.collision or "unknown",
        speed=_fmt_speed(event.speed_kmh),
    )


class Dispatcher:
    """Background worker turning crash events into three notifications each.

    Runs alongside ingestion; a telephony stall delays dispatch, never
    ingestion. Fan-out per event is serialized. recover() picks up crashes
    that were persisted but never dispatched (e.g. after a crash-restart)
    and finishes attempts for rows still pending.
    """

    def __init__(
        self,
        store: EventStore,
        geocoder,
        telephony: Telephony,
        emergency_number: str = "911",
        retry: RetryPolicy = RetryPolicy(),
        sleep: Callable[[float], None] = time.sleep,
        now_ms: Callable[[], int] = lambda: int(time.time() * 1000),
    ):
        self.store = store
        self.geocoder = geocoder
        self.telephony = telephony
        self.emergency_number = emergency_number
        self.retry = retry
        self._sleep = sleep
        self._now_ms = now_ms
        self._queue: queue.Queue = queue.Queue()
        self._thread: Optional[threading.Thread] = None
        self._stop = threading.Event()

    def start(self) -> None:
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, name="dispatcher", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        self._queue.put(None)
        if self._thread is not None:
            self._thread.join(timeout=10)
            self._thread = None

    def enqueue(self, event_id: int) -> None:
        self._queue.put(event_id)

    def recover(self) -> int:
        """Queue crashes with no outbox rows and re-queue pending rows; returns count."""
        missing = self.store.crash_events_without_notifications()
        pending_events = sorted({n.event_id for n in self.store.pending_notifications()})
        for event_id in missing + [e for e in pending_events if e not in missing]:
            self.enqueue(event_id)
        return len(missing) + len(pending_events)

    def drain(self, timeout_s: float = 30.0) -> bool:
        """Wait until all queued work is done; True on success."""
        deadline = time.monotonic() + timeout_s
        while time.monotonic() < deadline:
            if self._queue.unfinished_tasks == 0:
                return True
            time.sleep(0.005)
        return False

    def _run(self) -> None:
        while not self._stop.is_set():
            job = self._queue.get()
            try:
                if job is None:
                    continue
                self._dispatch(job)
            except Exception:
                log.exception("dispatch of event %s failed", job)
            finally:
                self._queue.task_done()

    def _dispatch(self, event_id: int) -> None:
        event = self.store.event_by_id(event_id)
        if event is None or event.type != "crash":
            return
        existing = self.store.notifications_for_event(event_id)
        if existing:
            # restart recovery: finish rows that never completed
            for n in existing:
                if n.status == "pending":
                    self._attempt_with_retries(n)
            return

        driver = self.store.get_driver(event.driver_id)
        try:
            geo = self.geocoder.reverse_geocode(event.lat, event.lon)
        except Exception:
            geo = GeocodeResult(fallback_address(event.lat, event.lon), "fallback")
        message = compose_emergency_message(event, driver, geo.address)

        contact = driver.emergency_contact_phone if driver else ""
        rows = [(event_id, "voice_911", self.emergency_number, message, "pending", 0, None, None)]
        for kind in ("voice_contact", "sms_contact"):
            if contact:
                rows.append((event_id, kind, contact, message, "pending", 0, None, None))
            else:
                rows.append((event_id, kind, "", message, "failed", 0, self._now_ms(), NO_CONTACT_REASON))
        self.store.create_notifications(rows)

        for n in self.store.notifications_for_event(event_id):
            if n.status == "pending":
                self._attempt_with_retries(n)

    def _attempt_with_retries(self, n: NotificationRecord) -> None:
        attempts = n.attempts
        while attempts < self.retry.max_attempts:
            attempts += 1
            try:
                if n.kind == "sms_contact":
                    self.telephony.text(n.to, n.message)
                else:
                    self.telephony.call(n.to, n.message)
                self.store.update_notification(n.notif_id, "sent", attempts, self._now_ms())
                return
            except TelephonyError as e:
                if attempts >= self.retry.max_attempts:
                    self.store.update_notification(
                        n.notif_id, "failed", attempts, self._now_ms(), str(e)
                    )
                    return
                self.store.update_notification(
                    n.notif_id, "pending", attempts, self._now_ms(), str(e)
                )
                self._sleep(self.retry.delay_s(attempts))
