"""Crash and pothole detection from accelerometer and GPS streams.

All detection is pure and deterministic: samples in, events out. One
detector instance handles one vehicle; instances share no state.

Axis convention (fixed here, documented for consumers): x is longitudinal
with +x forward, y is lateral with +y left, z is vertical with +z up.
Samples are linear acceleration in m/s^2 with gravity already removed.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, Union

STANDARD_GRAVITY_MPS2 = 9.80665

AXES = ("x", "y", "z")


class DetectionError(ValueError):
    pass


class InvalidSampleError(DetectionError):
    """A sample contains a non-finite component."""


class StreamOrderError(DetectionError):
    """An input stream is not sorted by timestamp."""


class EventKind(str, Enum):
    CRASH = "crash"
    POTHOLE = "pothole"


class Impulse(Enum):
    NONE = "none"
    POTHOLE_CANDIDATE = "pothole_candidate"
    CRASH = "crash"


class Collision(str, Enum):
    HEAD_ON = "head_on"
    REAR_END = "rear_end"
    T_BONE_LEFT = "t_bone_left"
    T_BONE_RIGHT = "t_bone_right"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class AccelSample:
    t: int  # ms since epoch
    ax: float  # m/s^2
    ay: float
    az: float


@dataclass(frozen=True)
class GpsFix:
    t: int  # ms since epoch
    lat: float  # degrees, [-90, 90]
    lon: float  # degrees, [-180, 180]
    speed_kmh: float


@dataclass(frozen=True)
class GVector:
    gx: float
    gy: float
    gz: float


@dataclass(frozen=True)
class DetectionConfig:
    gravity_mps2: float = STANDARD_GRAVITY_MPS2
    crash_g: float = 12.0
    pothole_g_min: float = 3.0
    pothole_max_duration_ms: int = 150
    debounce_ms: int = 2000
    full_scale_g: float = 16.0

    def __post_init__(self) -> None:
        if not (self.gravity_mps2 > 0):
            raise DetectionError("gravity_mps2 must be positive")
        if not (0 < self.pothole_g_min < self.crash_g <= self.full_scale_g):
            raise DetectionError(
                "thresholds must satisfy 0 < pothole_g_min < crash_g <= full_scale_g"
            )
        if self.pothole_max_duration_ms <= 0 or self.debounce_ms <= 0:
            raise DetectionError("durations must be positive")


@dataclass(frozen=True)
class CrashSummary:
    max_axis: str  # "x" | "y" | "z"
    g_force: float  # peak |g| on that axis
    magnitude_pct: float  # vector magnitude of the peak sample, % of full scale
    collision: Collision


@dataclass(frozen=True)
class DetectedEvent:
    kind: EventKind
    t: int  # trigger sample time, ms since epoch
    fix: GpsFix
    speed_kmh: float
    # CrashSummary for crashes, peak |gz| in G for potholes
    summary: Union[CrashSummary, float]
    driver_id: str
    # True when no fix preceded the trigger; fix is then the first one seen
    stale_fix: bool = False


def magnitude_pct(g: GVector, full_scale_g: float) -> float:
    """Vector magnitude as a percentage of sensor full scale (may exceed 100)."""
    return 100.0 * math.sqrt(g.gx * g.gx + g.gy * g.gy + g.gz * g.gz) / full_scale_g


def to_g_force(sample: AccelSample, cfg: DetectionConfig) -> GVector:
    """Convert one accelerometer sample to per-axis g-force."""
    for name, v in (("ax", sample.ax), ("ay", sample.ay), ("az", sample.az)):
        if not math.isfinite(v):
            raise InvalidSampleError(f"non-finite {name} at t={sample.t}")
    return GVector(
        sample.ax / cfg.gravity_mps2,
        sample.ay / cfg.gravity_mps2,
        sample.az / cfg.gravity_mps2,
    )


def classify_impulse(g: GVector, cfg: DetectionConfig) -> Impulse:
    """Classify one g-vector. The crash threshold is strict: exactly crash_g is not a crash."""
    if max(abs(g.gx), abs(g.gy), abs(g.gz)) > cfg.crash_g:
        return Impulse.CRASH
    if abs(g.gz) >= cfg.pothole_g_min:
        return Impulse.POTHOLE_CANDIDATE
    return Impulse.NONE


def dominant_axis(g: GVector) -> tuple[str, float]:
    """Axis with the greatest |g| and its signed value; ties resolve x, then y, then z."""
    best_axis, best_val = "x", g.gx
    for axis, val in (("y", g.gy), ("z", g.gz)):
        if abs(val) > abs(best_val):
            best_axis, best_val = axis, val
    return best_axis, best_val


def classify_collision(peak: GVector) -> Collision:
    """Map the dominant axis and its sign to a collision class.

    +x is forward, so a frontal impact decelerates the vehicle (gx < 0):
    head-on. +y is left, so an impact from the right pushes the vehicle
    left (gy > 0): t-bone from the right side reads as t_bone_left by the
    axis it pushes toward. A z-dominant impulse is vertical.
    """
    axis, val = dominant_axis(peak)
    if axis == "x":
        return Collision.HEAD_ON if val < 0 else Collision.REAR_END
    if axis == "y":
        return Collision.T_BONE_LEFT if val > 0 else Collision.T_BONE_RIGHT
    return Collision.VERTICAL


def crash_summary(window: Sequence[GVector], cfg: DetectionConfig) -> CrashSummary:
    """Summarize a crash impulse from its g-vector window.

    The peak sample is the one holding the component with the greatest
    absolute value across the window (first occurrence wins ties across
    samples; within a sample, axis order x, y, z).
    """
    if not window:
        raise DetectionError("crash_summary needs a non-empty window")
    if not any(classify_impulse(g, cfg) is Impulse.CRASH for g in window):
        raise DetectionError("window contains no crash-classified vector")
    peak = window[0]
    peak_axis, peak_val = dominant_axis(peak)
    for g in window[1:]:
        axis, val = dominant_axis(g)
        if abs(val) > abs(peak_val):
            peak, peak_axis, peak_val = g, axis, val
    return CrashSummary(
        max_axis=peak_axis,
        g_force=abs(peak_val),
        magnitude_pct=magnitude_pct(peak, cfg.full_scale_g),
        collision=classify_collision(peak),
    )


def _check_sorted(ts: Sequence[int], what: str) -> None:
    for i in range(1, len(ts)):
        if ts[i] < ts[i - 1]:
            raise StreamOrderError(f"{what} stream goes backwards at t={ts[i]}")


def run_detector(
    samples: Iterable[AccelSample],
    fixes: Iterable[GpsFix],
    driver_id: str,
    cfg: DetectionConfig,
) -> list[DetectedEvent]:
    """Scan a trace and return detected events in trigger-time order.

    Rules:
      * A crash impulse is a maximal group of crash-classified samples no
        more than debounce_ms apart; it emits one crash event stamped at
        its first crash sample (minimum reporting latency).
      * A z-impulse is a maximal run of samples with |gz| >= pothole_g_min.
        It emits a pothole when its peak stays below crash_g, its
        above-threshold duration is <= pothole_max_duration_ms, no sample
        of the run falls within debounce_ms of any crash-classified sample
        (a crash suppresses potholes of the same impulse), and its trigger
        is >= debounce_ms after the previously emitted event.
      * Every event carries the latest fix at or before its trigger. An
        event triggered before the first fix is stamped with that first
        fix and flagged stale. If the trace has no fixes at all, events
        cannot be located and none are returned.
    """
    if not driver_id:
        raise DetectionError("driver_id must be non-empty")
    samples = list(samples)
    fixes = list(fixes)
    ts = [s.t for s in samples]
    _check_sorted(ts, "accel")
    _check_sorted([f.t for f in fixes], "gps")

    gs = [to_g_force(s, cfg) for s in samples]

    # crash impulses: clusters of crash samples within debounce_ms of each other
    clusters: list[list[int]] = []
    for i, g in enumerate(gs):
        if classify_impulse(g, cfg) is not Impulse.CRASH:
            continue
        if clusters and ts[i] - ts[clusters[-1][-1]] <= cfg.debounce_ms:
            clusters[-1].append(i)
        else:
            clusters.append([i])

    candidates: list[tuple[int, EventKind, Union[CrashSummary, float]]] = []
    regions = []  # time spans owned by a crash impulse
    for cluster in clusters:
        window = [gs[i] for i in cluster]
        candidates.append((ts[cluster[0]], EventKind.CRASH, crash_summary(window, cfg)))
        regions.append((ts[cluster[0]] - cfg.debounce_ms, ts[cluster[-1]] + cfg.debounce_ms))

    # z-impulses: maximal runs of samples at or above the pothole threshold
    i = 0
    while i < len(gs):
        if abs(gs[i].gz) < cfg.pothole_g_min:
            i += 1
            continue
        j = i
        while j + 1 < len(gs) and abs(gs[j + 1].gz) >= cfg.pothole_g_min:
            j += 1
        peak = max(abs(g.gz) for g in gs[i : j + 1])
        duration = ts[j] - ts[i]
        suppressed = any(
            lo <= ts[k] <= hi for k in range(i, j + 1) for lo, hi in regions
        )
        if peak < cfg.crash_g and duration <= cfg.pothole_max_duration_ms and not suppressed:
            candidates.append((ts[i], EventKind.POTHOLE, peak))
        i = j + 1

    # crashes are never debounced away; potholes keep their distance
    candidates.sort(key=lambda c: (c[0], 0 if c[1] is EventKind.CRASH else 1))
    emitted: list[tuple[int, EventKind, Union[CrashSummary, float]]] = []
    last_t: int | None = None
    for t, kind, summary in candidates:
        if kind is EventKind.POTHOLE and last_t is not None and t - last_t < cfg.debounce_ms:
            continue
        emitted.append((t, kind, summary))
        last_t = t

    if not fixes:
        return []
    fix_ts = [f.t for f in fixes]
    events = []
    for t, kind, summary in emitted:
        k = bisect_right(fix_ts, t) - 1
        fix = fixes[k] if k >= 0 else fixes[0]
        events.append(
            DetectedEvent(
                kind=kind,
                t=t,
                fix=fix,
                speed_kmh=fix.speed_kmh,
                summary=summary,
                driver_id=driver_id,
                stale_fix=k < 0,
            )
        )
    return events
