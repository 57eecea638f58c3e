"""Shared test utilities: oracles, generators, and a full-system harness.

reference_scan is the independent single-pass detector used as the oracle
for run_detector: a deliberately different implementation (incremental
state machine vs. the library's phased scan) of the same contract.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field

from roadwatch.api import AnalyticsApi
from roadwatch.detection import (
    AccelSample,
    Collision,
    CrashSummary,
    DetectionConfig,
    DetectedEvent,
    EventKind,
    GpsFix,
    GVector,
)
from roadwatch.geocode import Gazetteer, GazetteerGeocoder
from roadwatch.ingest import IngestionServer
from roadwatch.livefeed import LiveFeed
from roadwatch.notify import Dispatcher, MockTelephony, RetryPolicy
from roadwatch.store import EventStore
from roadwatch.wire import EventReport


# ---------------------------------------------------------------------------
# independent detector reference


def reference_scan(samples, fixes, driver_id, cfg: DetectionConfig):
    """Single-pass brute-force reference for run_detector."""
    samples = list(samples)
    fixes = list(fixes)

    crash_ts = []  # every crash-classified sample time
    crash_clusters = []  # (trigger_t, window of g-vectors)
    zruns = []  # (t0, t1, peak |gz|)
    cluster = None  # [trigger_t, last_crash_t, window]
    run = None  # [t0, t1, peak]

    for s in samples:
        g = GVector(s.ax / cfg.gravity_mps2, s.ay / cfg.gravity_mps2, s.az / cfg.gravity_mps2)
        is_crash = (
            abs(g.gx) > cfg.crash_g or abs(g.gy) > cfg.crash_g or abs(g.gz) > cfg.crash_g
        )
        if is_crash:
            crash_ts.append(s.t)
            if cluster is not None and s.t - cluster[1] <= cfg.debounce_ms:
                cluster[1] = s.t
                cluster[2].append(g)
            else:
                if cluster is not None:
                    crash_clusters.append((cluster[0], cluster[2]))
                cluster = [s.t, s.t, [g]]
        if abs(g.gz) >= cfg.pothole_g_min:
            if run is None:
                run = [s.t, s.t, abs(g.gz)]
            else:
                run[1] = s.t
                run[2] = max(run[2], abs(g.gz))
        elif run is not None:
            zruns.append(tuple(run))
            run = None
    if cluster is not None:
        crash_clusters.append((cluster[0], cluster[2]))
    if run is not None:
        zruns.append(tuple(run))

    def summarize(window):
        best_vec, best_axis, best_val = None, "x", 0.0
        for vec in window:
            for axis, val in (("x", vec.gx), ("y", vec.gy), ("z", vec.gz)):
                if best_vec is None or abs(val) > abs(best_val):
                    best_vec, best_axis, best_val = vec, axis, val
        if best_axis == "x":
            collision = Collision.HEAD_ON if best_val < 0 else Collision.REAR_END
        elif best_axis == "y":
            collision = Collision.T_BONE_LEFT if best_val > 0 else Collision.T_BONE_RIGHT
        else:
            collision = Collision.VERTICAL
        # math.sqrt, not **0.5: pow is not correctly rounded, and the
        # equality assertion against the implementation is exact
        mag = math.sqrt(
            best_vec.gx * best_vec.gx + best_vec.gy * best_vec.gy + best_vec.gz * best_vec.gz
        )
        return CrashSummary(best_axis, abs(best_val), 100.0 * mag / cfg.full_scale_g, collision)

    triggers = [(t, EventKind.CRASH, summarize(w)) for t, w in crash_clusters]
    for t0, t1, peak in zruns:
        if peak >= cfg.crash_g or t1 - t0 > cfg.pothole_max_duration_ms:
            continue
        if any(t0 - cfg.debounce_ms <= tc <= t1 + cfg.debounce_ms for tc in crash_ts):
            continue
        triggers.append((t0, EventKind.POTHOLE, peak))

    triggers.sort(key=lambda x: (x[0], 0 if x[1] is EventKind.CRASH else 1))
    kept = []
    last_t = None
    for t, kind, payload in triggers:
        if kind is EventKind.POTHOLE and last_t is not None and t - last_t < cfg.debounce_ms:
            continue
        kept.append((t, kind, payload))
        last_t = t

    if not fixes:
        return []
    events = []
    for t, kind, payload in kept:
        fix = None
        for f in fixes:
            if f.t <= t:
                fix = f
            else:
                break
        stale = fix is None
        if stale:
            fix = fixes[0]
        events.append(
            DetectedEvent(kind, t, fix, fix.speed_kmh, payload, driver_id, stale)
        )
    return events


# ---------------------------------------------------------------------------
# trace generators

G = 9.80665


def accel(t, gx=0.0, gy=0.0, gz=0.0):
    """Sample from g-force values under standard gravity."""
    return AccelSample(t, gx * G, gy * G, gz * G)


def flat_fixes(t0=0, t1=60_000, every_ms=1000, lat=32.98, lon=-96.75, speed=45.0):
    return [GpsFix(t, lat, lon, speed) for t in range(t0, t1 + 1, every_ms)]


def random_trace(rng: random.Random, n=None, sub_threshold=False, fix_gap_ms=None):
    """Messy but valid random trace: noise, z-runs, crashes, boundary values."""
    n = n if n is not None else rng.randint(20, 400)
    t = rng.randint(0, 1_000_000)
    samples = []
    for _ in range(n):
        t += rng.choice([0, 5, 10, 20, 40, 100, 300, 900, 1999, 2000, 2001, 2600])
        roll = rng.random()
        gx = gy = gz = rng.uniform(-1.5, 1.5)
        if roll < 0.6:
            pass  # plain noise
        elif roll < 0.8:
            gz = rng.choice([-1, 1]) * rng.uniform(3.0, 11.9)  # pothole range
        elif roll < 0.93 and not sub_threshold:
            spike = rng.choice([-1, 1]) * rng.uniform(12.01, 16.0)
            axis = rng.randrange(3)
            gx, gy, gz = [spike if i == axis else rng.uniform(-1, 1) for i in range(3)]
        elif roll < 0.93:
            gz = rng.choice([-1, 1]) * rng.uniform(3.0, 11.99)
        else:
            # boundary exercises; these constants round-trip the m/s^2
            # conversion exactly, so 12.0 stays on the not-a-crash side
            gz = rng.choice([3.0, 11.9999, 12.0])
        samples.append(accel(t, gx, gy, gz))

    fixes = []
    gap = fix_gap_ms or rng.choice([500, 1000, 3000])
    start = samples[0].t + rng.choice([-2000, -gap, 1500])  # sometimes after first samples
    ft = start
    while ft <= samples[-1].t + gap:
        fixes.append(
            GpsFix(ft, rng.uniform(-90, 90), rng.uniform(-180, 180), rng.uniform(0, 160))
        )
        ft += gap
    return samples, fixes


# ---------------------------------------------------------------------------
# naive analytics oracles (full scans over plain dicts)


def naive_events(records, frm, to, type_filter=None):
    rows = [
        r for r in records
        if frm <= r["t"] < to and (type_filter is None or r["type"] == type_filter)
    ]
    return sorted(rows, key=lambda r: (r["t"], r["event_id"]))


def naive_speeds(records, frm, to):
    crashes = naive_events(records, frm, to, "crash")
    speeds = [r["speed_kmh"] for r in crashes]
    return {
        "count": len(speeds),
        "mean": sum(speeds) / len(speeds) if speeds else None,
        "max": max(speeds) if speeds else None,
        "rows": [
            {"event_id": r["event_id"], "t": r["t"], "speed_kmh": r["speed_kmh"]}
            for r in crashes
        ],
    }


def naive_counts(records, frm, to, bucket_ms):
    out = []
    start = frm
    while start < to:
        in_bucket = [r for r in records if start <= r["t"] < min(start + bucket_ms, to)]
        out.append(
            {
                "bucket_start": start,
                "crashes": sum(1 for r in in_bucket if r["type"] == "crash"),
                "potholes": sum(1 for r in in_bucket if r["type"] == "pothole"),
            }
        )
        start += bucket_ms
    return out


# ---------------------------------------------------------------------------
# wire fixtures


def make_report(**kw) -> EventReport:
    base = dict(
        v=1, seq=1, driver_id="d1", type="pothole", t=0, lat=0.0, lon=0.0,
        speed_kmh=0.0, max_axis="z", g_force=4.2, magnitude_pct=26.25, collision=None,
    )
    base.update(kw)
    return EventReport(**base)


def make_crash_report(**kw) -> EventReport:
    base = dict(
        v=1, seq=1, driver_id="d1", type="crash", t=1000, lat=32.98, lon=-96.75,
        speed_kmh=60.0, max_axis="x", g_force=13.0, magnitude_pct=81.5,
        collision="head_on",
    )
    base.update(kw)
    return EventReport(**base)


# frames that must be rejected, with the field the error must name
MALFORMED_FRAMES = [
    (b"", "frame"),
    (b"not json", "frame"),
    (b'{"v":1,"seq":1', "frame"),  # truncated
    (b"[1,2,3]", "frame"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":NaN,"max_axis":"z","g_force":1,"magnitude_pct":1,"collision":null}',
     "frame"),
    (b'{"v":2,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}', "v"),
    (b'{"v":1,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}', "seq"),
    (b'{"v":1,"seq":0,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}', "seq"),
    (b'{"v":1,"seq":1,"driver_id":"","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}',
     "driver_id"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"earthquake","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}',
     "type"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":91,"lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}', "lat"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":-180.5,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}', "lon"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":-1,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}',
     "speed_kmh"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"q","g_force":4,"magnitude_pct":25,"collision":null}',
     "max_axis"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":"head_on"}',
     "collision"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"x","g_force":4,"magnitude_pct":25,"collision":null}',
     "max_axis"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"crash","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"x","g_force":4,"magnitude_pct":25,"collision":"sideswipe"}',
     "collision"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"pothole","t":-5,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}', "t"),
    (b'{"v":true,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":0,"lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}', "v"),
    (b'{"v":1,"seq":1,"driver_id":"d","type":"pothole","t":0,"lat":"zero","lon":0,'
     b'"speed_kmh":0,"max_axis":"z","g_force":4,"magnitude_pct":25,"collision":null}', "lat"),
]


# ---------------------------------------------------------------------------
# full system harness

GAZETTEER_CSV = (
    "name,lat,lon\n"
    "Main St & 1st Ave,32.98000,-96.75000\n"
    "Campbell Rd & Floyd Rd,32.98270,-96.75000\n"
)


@dataclass
class SystemHarness:
    store: EventStore
    livefeed: LiveFeed
    telephony: MockTelephony
    dispatcher: Dispatcher
    ingest: IngestionServer
    api: AnalyticsApi
    extras: dict = field(default_factory=dict)

    @property
    def wire_port(self) -> int:
        return self.ingest.port

    @property
    def api_port(self) -> int:
        return self.api.port

    def api_url(self, path: str) -> str:
        return f"http://127.0.0.1:{self.api.port}{path}"

    def stop(self) -> None:
        self.api.stop()
        self.ingest.stop()
        self.dispatcher.stop()
        self.store.close()


def build_system(
    tmp_path,
    retry: RetryPolicy = None,
    heartbeat_s: float = 15.0,
    livefeed_buffer: int = 256,
    now_ms=None,
    start: bool = True,
) -> SystemHarness:
    gaz_path = tmp_path / "gazetteer.csv"
    if not gaz_path.exists():
        gaz_path.write_text(GAZETTEER_CSV)
    store = EventStore(tmp_path / "events.db")
    livefeed = LiveFeed(buffer_size=livefeed_buffer)
    telephony = MockTelephony()
    dispatcher = Dispatcher(
        store,
        GazetteerGeocoder(Gazetteer.load(gaz_path)),
        telephony,
        retry=retry or RetryPolicy(max_attempts=3, base_s=0.002, factor=2.0, cap_s=0.01),
    )
    kw = {} if now_ms is None else {"now_ms": now_ms}
    ingest = IngestionServer(store, livefeed, on_crash=dispatcher.enqueue, port=0, **kw)
    api = AnalyticsApi(store, livefeed, port=0, heartbeat_s=heartbeat_s, **kw)
    harness = SystemHarness(store, livefeed, telephony, dispatcher, ingest, api)
    if start:
        dispatcher.start()
        ingest.start()
        api.start()
    return harness


def wait_until(pred, timeout_s=5.0, tick_s=0.005):
    deadline = time.monotonic() + timeout_s
    while time.monotonic() < deadline:
        if pred():
            return True
        time.sleep(tick_s)
    return False


def send_frames(port: int, frames: list[bytes], read_replies=True, host="127.0.0.1"):
    """Raw wire client: send frames, return reply lines."""
    import socket

    with socket.create_connection((host, port), timeout=5) as sock:
        for f in frames:
            sock.sendall(f)
        if not read_replies:
            return []
        replies = []
        buf = b""
        sock.settimeout(5)
        while len(replies) < len(frames):
            try:
                chunk = sock.recv(65536)
            except socket.timeout:
                break
            if not chunk:
                break
            buf += chunk
            while b"\n" in buf:
                line, buf = buf.split(b"\n", 1)
                replies.append(line)
        return replies
