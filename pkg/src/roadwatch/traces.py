"""Sensor trace files and deterministic scenario generation.

A trace file stands in for live accelerometer/GPS polling. Line 1 is a
header: ``# {"device_id": ..., "config": {...}}``. Every other line is a
CSV row, time-sorted: ``A,t,ax,ay,az`` (acceleration, m/s^2) or
``G,t,lat,lon,speed_kmh`` (GPS fix). Hand-written fixtures are welcome.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from .detection import AccelSample, GpsFix, STANDARD_GRAVITY_MPS2
from .geocode import haversine_m

INJECTION_KINDS = ("crash_x", "crash_y", "pothole")
_INJECTION_AXIS = {"crash_x": 0, "crash_y": 1, "pothole": 2}

# baseline noise amplitude per axis, in G; stays well under every threshold
NOISE_G = 0.25


class TraceFormatError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class TraceFile:
    device_id: str
    config_overrides: dict
    samples: list[AccelSample]
    fixes: list[GpsFix]


@dataclass(frozen=True)
class Injection:
    t: int  # ms offset into the trace
    kind: str  # crash_x | crash_y | pothole
    peak_g: float  # signed; sign picks the impact direction
    duration_ms: int


@dataclass(frozen=True)
class ScenarioSpec:
    route: list[tuple[float, float]]  # (lat, lon) waypoints
    cruise_speed_kmh: float
    sample_rate_hz: float
    fix_rate_hz: float
    injections: list[Injection] = field(default_factory=list)
    seed: int = 0
    duration_ms: int | None = None  # derived from route length when omitted
    device_id: str = "veh-1"

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0 or self.fix_rate_hz <= 0:
            raise ScenarioError("sample and fix rates must be positive")
        if self.cruise_speed_kmh <= 0:
            raise ScenarioError("cruise_speed_kmh must be positive")
        if not self.route:
            raise ScenarioError("route needs at least one waypoint")
        dur = self.total_duration_ms()
        for inj in self.injections:
            if inj.kind not in INJECTION_KINDS:
                raise ScenarioError(f"unknown injection kind {inj.kind!r}")
            if inj.duration_ms <= 0:
                raise ScenarioError("injection duration_ms must be positive")
            if not math.isfinite(inj.peak_g):
                raise ScenarioError("injection peak_g must be finite")
            if not 0 <= inj.t < dur:
                raise ScenarioError(f"injection at t={inj.t} outside trace duration {dur}")

    def route_length_m(self) -> float:
        total = 0.0
        for (la1, lo1), (la2, lo2) in zip(self.route, self.route[1:]):
            total += haversine_m(la1, lo1, la2, lo2)
        return total

    def total_duration_ms(self) -> int:
        if self.duration_ms is not None:
            if self.duration_ms <= 0:
                raise ScenarioError("duration_ms must be positive")
            return self.duration_ms
        length = self.route_length_m()
        if length <= 0:
            raise ScenarioError("cannot derive duration from a zero-length route")
        return round(length / (self.cruise_speed_kmh / 3.6) * 1000)


def scenario_from_json(text: str) -> ScenarioSpec:
    try:
        obj = json.loads(text)
    except ValueError as e:
        raise ScenarioError(f"bad scenario JSON: {e}") from None
    try:
        injections = [
            Injection(int(i["t"]), str(i["kind"]), float(i["peak_g"]), int(i["duration_ms"]))
            for i in obj.get("injections", [])
        ]
        return ScenarioSpec(
            route=[(float(p[0]), float(p[1])) for p in obj["route"]],
            cruise_speed_kmh=float(obj["cruise_speed_kmh"]),
            sample_rate_hz=float(obj["sample_rate_hz"]),
            fix_rate_hz=float(obj["fix_rate_hz"]),
            injections=injections,
            seed=int(obj.get("seed", 0)),
            duration_ms=int(obj["duration_ms"]) if "duration_ms" in obj else None,
            device_id=str(obj.get("device_id", "veh-1")),
        )
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ScenarioError(f"bad scenario field: {e}") from None


def _route_position(route: list[tuple[float, float]], dist_m: float) -> tuple[float, float]:
    if len(route) == 1:
        return route[0]
    remaining = dist_m
    for (la1, lo1), (la2, lo2) in zip(route, route[1:]):
        seg = haversine_m(la1, lo1, la2, lo2)
        if remaining <= seg and seg > 0:
            f = remaining / seg
            return la1 + f * (la2 - la1), lo1 + f * (lo2 - lo1)
        remaining -= seg
    return route[-1]


def generate_trace(spec: ScenarioSpec) -> TraceFile:
    """Synthesize a trace: noise baseline, half-sine injections, route fixes.

    Deterministic for a fixed seed. Injections override their axis while
    active so the requested peak appears exactly (up to sample timing).
    """
    rng = random.Random(spec.seed)
    duration = spec.total_duration_ms()
    g = STANDARD_GRAVITY_MPS2

    samples = []
    n = math.floor(duration * spec.sample_rate_hz / 1000)
    for i in range(n + 1):
        t = round(i * 1000 / spec.sample_rate_hz)
        axes = [rng.uniform(-NOISE_G, NOISE_G) * g for _ in range(3)]
        for inj in spec.injections:
            if inj.t <= t <= inj.t + inj.duration_ms:
                phase = (t - inj.t) / inj.duration_ms
                axes[_INJECTION_AXIS[inj.kind]] = inj.peak_g * g * math.sin(math.pi * phase)
        samples.append(AccelSample(t, axes[0], axes[1], axes[2]))

    fixes = []
    m = math.floor(duration * spec.fix_rate_hz / 1000)
    mps = spec.cruise_speed_kmh / 3.6
    for j in range(m + 1):
        t = round(j * 1000 / spec.fix_rate_hz)
        lat, lon = _route_position(spec.route, mps * t / 1000)
        fixes.append(GpsFix(t, lat, lon, spec.cruise_speed_kmh))

    return TraceFile(spec.device_id, {}, samples, fixes)


def write_trace(trace: TraceFile, path: Union[str, Path]) -> None:
    rows: list[tuple[int, str, str]] = []
    for s in trace.samples:
        rows.append((s.t, "A", f"A,{s.t},{s.ax!r},{s.ay!r},{s.az!r}"))
    for f in trace.fixes:
        rows.append((f.t, "G", f"G,{f.t},{f.lat!r},{f.lon!r},{f.speed_kmh!r}"))
    rows.sort(key=lambda r: (r[0], r[1]))
    header = json.dumps({"device_id": trace.device_id, "config": trace.config_overrides})
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        for _, _, line in rows:
            fh.write(line + "\n")


def parse_trace(path: Union[str, Path]) -> TraceFile:
    samples: list[AccelSample] = []
    fixes: list[GpsFix] = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise TraceFormatError("line 1: missing '# {...}' header")
        try:
            header = json.loads(first[1:])
            device_id = str(header["device_id"])
            config = dict(header.get("config", {}))
        except (ValueError, KeyError, TypeError) as e:
            raise TraceFormatError(f"line 1: bad header: {e}") from None

        last_t = None
        for lineno, raw in enumerate(fh, start=2):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                tag = parts[0]
                if tag == "A" and len(parts) == 5:
                    t = int(parts[1])
                    samples.append(AccelSample(t, float(parts[2]), float(parts[3]), float(parts[4])))
                elif tag == "G" and len(parts) == 5:
                    t = int(parts[1])
                    fixes.append(GpsFix(t, float(parts[2]), float(parts[3]), float(parts[4])))
                else:
                    raise ValueError(f"unknown row tag or arity: {tag!r}")
            except ValueError as e:
                raise TraceFormatError(f"line {lineno}: {e}") from None
            if last_t is not None and t < last_t:
                raise TraceFormatError(f"line {lineno}: rows not sorted by t")
            last_t = t
    return TraceFile(device_id, config, samples, fixes)
