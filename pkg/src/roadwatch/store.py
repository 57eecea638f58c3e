"""Embedded persistence for events, drivers, and the notification outbox.

Single SQLite file in WAL mode with full fsync on commit: an insert that
returned is an insert that survives a kill. One writer at a time (all
access is serialized on a lock), readers see only committed rows.
All time ranges are half-open [from, to).
"""

from __future__ import annotations

import csv
import math
import sqlite3
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .wire import EventReport

DRIVERS_CSV_HEADER = "driver_id,name,car,plate,contact_name,contact_phone"

_SCHEMA = """
CREATE TABLE IF NOT EXISTS events (
    event_id INTEGER PRIMARY KEY AUTOINCREMENT,
    received_at INTEGER NOT NULL,
    v INTEGER NOT NULL,
    seq INTEGER NOT NULL,
    driver_id TEXT NOT NULL,
    type TEXT NOT NULL,
    t INTEGER NOT NULL,
    lat REAL NOT NULL,
    lon REAL NOT NULL,
    speed_kmh REAL NOT NULL,
    max_axis TEXT NOT NULL,
    g_force REAL NOT NULL,
    magnitude_pct REAL NOT NULL,
    collision TEXT,
    flagged_unknown_driver INTEGER NOT NULL DEFAULT 0,
    UNIQUE (driver_id, seq)
);
CREATE INDEX IF NOT EXISTS idx_events_t ON events (t, event_id);
CREATE TABLE IF NOT EXISTS drivers (
    driver_id TEXT PRIMARY KEY,
    name TEXT NOT NULL,
    car TEXT NOT NULL,
    plate TEXT NOT NULL,
    emergency_contact_name TEXT NOT NULL,
    emergency_contact_phone TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS outbox (
    notif_id INTEGER PRIMARY KEY AUTOINCREMENT,
    event_id INTEGER NOT NULL,
    kind TEXT NOT NULL,
    to_phone TEXT NOT NULL,
    message TEXT NOT NULL,
    status TEXT NOT NULL,
    attempts INTEGER NOT NULL DEFAULT 0,
    last_attempt_at INTEGER,
    reason TEXT
);
CREATE INDEX IF NOT EXISTS idx_outbox_event ON outbox (event_id, notif_id);
"""


class StoreError(Exception):
    pass


class RangeError(ValueError):
    pass


@dataclass(frozen=True)
class EventRecord:
    event_id: int
    received_at: int
    v: int
    seq: int
    driver_id: str
    type: str
    t: int
    lat: float
    lon: float
    speed_kmh: float
    max_axis: str
    g_force: float
    magnitude_pct: float
    collision: Optional[str]
    flagged_unknown_driver: bool


@dataclass(frozen=True)
class DriverRecord:
    driver_id: str
    name: str
    car: str
    plate: str
    emergency_contact_name: str
    emergency_contact_phone: str


@dataclass(frozen=True)
class TimeBucketCount:
    bucket_start: int
    crashes: int
    potholes: int


@dataclass(frozen=True)
class SpeedRow:
    event_id: int
    t: int
    speed_kmh: float


@dataclass(frozen=True)
class SpeedStats:
    count: int
    mean: Optional[float]
    max: Optional[float]
    rows: list[SpeedRow]


@dataclass(frozen=True)
class NotificationRecord:
    notif_id: int
    event_id: int
    kind: str  # voice_911 | voice_contact | sms_contact
    to: str
    message: str
    status: str  # pending | sent | failed
    attempts: int
    last_attempt_at: Optional[int]
    reason: Optional[str]


def _event_from_row(row: sqlite3.Row) -> EventRecord:
    return EventRecord(
        event_id=row["event_id"],
        received_at=row["received_at"],
        v=row["v"],
        seq=row["seq"],
        driver_id=row["driver_id"],
        type=row["type"],
        t=row["t"],
        lat=row["lat"],
        lon=row["lon"],
        speed_kmh=row["speed_kmh"],
        max_axis=row["max_axis"],
        g_force=row["g_force"],
        magnitude_pct=row["magnitude_pct"],
        collision=row["collision"],
        flagged_unknown_driver=bool(row["flagged_unknown_driver"]),
    )


def _notif_from_row(row: sqlite3.Row) -> NotificationRecord:
    return NotificationRecord(
        notif_id=row["notif_id"],
        event_id=row["event_id"],
        kind=row["kind"],
        to=row["to_phone"],
        message=row["message"],
        status=row["status"],
        attempts=row["attempts"],
        last_attempt_at=row["last_attempt_at"],
        reason=row["reason"],
    )


def _check_range(from_ms: int, to_ms: int) -> None:
    if from_ms > to_ms:
        raise RangeError(f"from {from_ms} > to {to_ms}")


class EventStore:
    def __init__(self, path: Union[str, Path]):
        self.path = str(path)
        self._lock = threading.RLock()
        self._db = sqlite3.connect(self.path, check_same_thread=False, timeout=30.0)
        self._db.row_factory = sqlite3.Row
        self._db.execute("PRAGMA journal_mode=WAL")
        self._db.execute("PRAGMA synchronous=FULL")
        with self._db:
            self._db.executescript(_SCHEMA)

    def close(self) -> None:
        with self._lock:
            self._db.close()

    # -- events ----------------------------------------------------------

    def insert_event(
        self, report: EventReport, received_at: int, flagged_unknown_driver: bool = False
    ) -> tuple[int, bool]:
        """Persist a report; returns (event_id, created).

        Idempotent on (driver_id, seq): a duplicate returns the existing id
        with created=False and changes nothing.
        """
        with self._lock:
            try:
                cur = self._db.execute(
                    """
                    INSERT INTO events (received_at, v, seq, driver_id, type, t, lat, lon,
                                        speed_kmh, max_axis, g_force, magnitude_pct, collision,
                                        flagged_unknown_driver)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                    ON CONFLICT (driver_id, seq) DO NOTHING
                    """,
                    (
                        received_at,
                        report.v,
                        report.seq,
                        report.driver_id,
                        report.type,
                        report.t,
                        report.lat,
                        report.lon,
                        report.speed_kmh,
                        report.max_axis,
                        report.g_force,
                        report.magnitude_pct,
                        report.collision,
                        int(flagged_unknown_driver),
                    ),
                )
                created = cur.rowcount == 1
                self._db.commit()
            except sqlite3.Error as e:
                self._db.rollback()
                raise StoreError(f"insert failed: {e}") from None
            row = self._db.execute(
                "SELECT event_id FROM events WHERE driver_id = ? AND seq = ?",
                (report.driver_id, report.seq),
            ).fetchone()
            return row["event_id"], created

    def event_by_id(self, event_id: int) -> Optional[EventRecord]:
        with self._lock:
            row = self._db.execute(
                "SELECT * FROM events WHERE event_id = ?", (event_id,)
            ).fetchone()
        return _event_from_row(row) if row else None

    def query_events(
        self, from_ms: int, to_ms: int, type_filter: Optional[str] = None
    ) -> list[EventRecord]:
        """Events with from <= t < to, ascending (t, event_id)."""
        _check_range(from_ms, to_ms)
        sql = "SELECT * FROM events WHERE t >= ? AND t < ?"
        args: list = [from_ms, to_ms]
        if type_filter is not None:
            sql += " AND type = ?"
            args.append(type_filter)
        sql += " ORDER BY t, event_id"
        with self._lock:
            rows = self._db.execute(sql, args).fetchall()
        return [_event_from_row(r) for r in rows]

    def count_events(
        self, from_ms: int, to_ms: int, type_filter: Optional[str] = None
    ) -> int:
        _check_range(from_ms, to_ms)
        sql = "SELECT COUNT(*) AS n FROM events WHERE t >= ? AND t < ?"
        args: list = [from_ms, to_ms]
        if type_filter is not None:
            sql += " AND type = ?"
            args.append(type_filter)
        with self._lock:
            return self._db.execute(sql, args).fetchone()["n"]

    def speed_stats(self, from_ms: int, to_ms: int) -> SpeedStats:
        """Per-crash speeds in the range plus count/mean/max (crashes only)."""
        _check_range(from_ms, to_ms)
        with self._lock:
            rows = self._db.execute(
                "SELECT event_id, t, speed_kmh FROM events"
                " WHERE t >= ? AND t < ? AND type = 'crash' ORDER BY t, event_id",
                (from_ms, to_ms),
            ).fetchall()
        speeds = [r["speed_kmh"] for r in rows]
        return SpeedStats(
            count=len(speeds),
            mean=math.fsum(speeds) / len(speeds) if speeds else None,
            max=max(speeds) if speeds else None,
            rows=[SpeedRow(r["event_id"], r["t"], r["speed_kmh"]) for r in rows],
        )

    def counts_by_bucket(
        self, from_ms: int, to_ms: int, bucket_ms: int
    ) -> list[TimeBucketCount]:
        """Crash/pothole counts per bucket aligned to from, covering [from, to)."""
        _check_range(from_ms, to_ms)
        if bucket_ms <= 0:
            raise RangeError("bucket_ms must be positive")
        n_buckets = -(-(to_ms - from_ms) // bucket_ms)  # ceil
        counts = {i: [0, 0] for i in range(n_buckets)}
        with self._lock:
            rows = self._db.execute(
                "SELECT (t - ?) / ? AS b,"
                " SUM(type = 'crash') AS crashes, SUM(type = 'pothole') AS potholes"
                " FROM events WHERE t >= ? AND t < ? GROUP BY b",
                (from_ms, bucket_ms, from_ms, to_ms),
            ).fetchall()
        for r in rows:
            counts[r["b"]] = [r["crashes"], r["potholes"]]
        return [
            TimeBucketCount(from_ms + i * bucket_ms, counts[i][0], counts[i][1])
            for i in range(n_buckets)
        ]

    # -- drivers ---------------------------------------------------------

    def upsert_driver(self, d: DriverRecord) -> None:
        if not d.driver_id:
            raise StoreError("driver_id must be non-empty")
        if not d.emergency_contact_phone:
            raise StoreError("emergency_contact_phone must be non-empty")
        with self._lock, self._db:
            self._db.execute(
                """
                INSERT INTO drivers VALUES (?, ?, ?, ?, ?, ?)
                ON CONFLICT (driver_id) DO UPDATE SET
                    name = excluded.name, car = excluded.car, plate = excluded.plate,
                    emergency_contact_name = excluded.emergency_contact_name,
                    emergency_contact_phone = excluded.emergency_contact_phone
                """,
                (d.driver_id, d.name, d.car, d.plate,
                 d.emergency_contact_name, d.emergency_contact_phone),
            )

    def get_driver(self, driver_id: str) -> Optional[DriverRecord]:
        with self._lock:
            row = self._db.execute(
                "SELECT * FROM drivers WHERE driver_id = ?", (driver_id,)
            ).fetchone()
        if row is None:
            return None
        return DriverRecord(
            driver_id=row["driver_id"],
            name=row["name"],
            car=row["car"],
            plate=row["plate"],
            emergency_contact_name=row["emergency_contact_name"],
            emergency_contact_phone=row["emergency_contact_phone"],
        )

    def import_drivers_csv(self, path: Union[str, Path]) -> tuple[int, list[str]]:
        """Bulk upsert from CSV; returns (imported, warnings). Bad rows are skipped."""
        warnings = []
        imported = 0
        with open(path, "r", encoding="utf-8", newline="") as fh:
            header = fh.readline().rstrip("\r\n")
            if header != DRIVERS_CSV_HEADER:
                raise StoreError(f"drivers CSV header must be {DRIVERS_CSV_HEADER!r}")
            for lineno, row in enumerate(csv.reader(fh), start=2):
                if not row:
                    continue
                if len(row) != 6 or not row[0] or not row[5]:
                    warnings.append(f"line {lineno}: skipped malformed row")
                    continue
                self.upsert_driver(DriverRecord(*row))
                imported += 1
        return imported, warnings

    # -- outbox ----------------------------------------------------------

    def create_notifications(
        self, rows: list[tuple[int, str, str, str, str, int, Optional[int], Optional[str]]]
    ) -> list[int]:
        """Insert (event_id, kind, to, message, status, attempts, last_attempt_at, reason)
        rows in one transaction; returns notif_ids in input order."""
        with self._lock:
            try:
                ids = []
                for r in rows:
                    cur = self._db.execute(
                        "INSERT INTO outbox (event_id, kind, to_phone, message, status,"
                        " attempts, last_attempt_at, reason) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
                        r,
                    )
                    ids.append(cur.lastrowid)
                self._db.commit()
                return ids
            except sqlite3.Error as e:
                self._db.rollback()
                raise StoreError(f"outbox insert failed: {e}") from None

    def update_notification(
        self,
        notif_id: int,
        status: str,
        attempts: int,
        last_attempt_at: Optional[int],
        reason: Optional[str] = None,
    ) -> None:
        with self._lock, self._db:
            self._db.execute(
                "UPDATE outbox SET status = ?, attempts = ?, last_attempt_at = ?, reason = ?"
                " WHERE notif_id = ?",
                (status, attempts, last_attempt_at, reason, notif_id),
            )

    def notifications_for_event(self, event_id: int) -> list[NotificationRecord]:
        with self._lock:
            rows = self._db.execute(
                "SELECT * FROM outbox WHERE event_id = ? ORDER BY notif_id", (event_id,)
            ).fetchall()
        return [_notif_from_row(r) for r in rows]

    def all_notifications(self) -> list[NotificationRecord]:
        with self._lock:
            rows = self._db.execute("SELECT * FROM outbox ORDER BY notif_id").fetchall()
        return [_notif_from_row(r) for r in rows]

    def pending_notifications(self) -> list[NotificationRecord]:
        with self._lock:
            rows = self._db.execute(
                "SELECT * FROM outbox WHERE status = 'pending' ORDER BY notif_id"
            ).fetchall()
        return [_notif_from_row(r) for r in rows]

    def crash_events_without_notifications(self) -> list[int]:
        """Crash event ids with no outbox rows; used for dispatch recovery."""
        with self._lock:
            rows = self._db.execute(
                "SELECT e.event_id FROM events e WHERE e.type = 'crash'"
                " AND NOT EXISTS (SELECT 1 FROM outbox o WHERE o.event_id = e.event_id)"
                " ORDER BY e.event_id"
            ).fetchall()
        return [r["event_id"] for r in rows]
