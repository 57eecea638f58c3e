"""Newline-delimited JSON wire format between device agents and the server.

One frame is one UTF-8 JSON object terminated by a single 0x0A. The server
answers each persisted report with ``{"ack":seq}`` and each rejected frame
with ``{"err":"<field>","seq":N}``. Encoding is deterministic so a re-sent
report is byte-identical to the original.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Optional, Union

from .detection import Collision, DetectedEvent, EventKind

PROTOCOL_VERSION = 1
DEFAULT_WIRE_PORT = 7080

EVENT_TYPES = ("crash", "pothole")
COLLISION_CLASSES = tuple(c.value for c in Collision)

_FIELD_ORDER = (
    "v",
    "seq",
    "driver_id",
    "type",
    "t",
    "lat",
    "lon",
    "speed_kmh",
    "max_axis",
    "g_force",
    "magnitude_pct",
    "collision",
)


class WireError(Exception):
    pass


class ParseError(WireError):
    """Frame is not one well-formed JSON object."""


class ValidationError(WireError):
    """Frame parsed but a field is missing, mistyped, or out of range."""

    def __init__(self, field: str, detail: str = "", seq: int = 0):
        super().__init__(f"{field}: {detail}" if detail else field)
        self.field = field
        self.seq = seq


class VersionError(ValidationError):
    """Unknown protocol version; the connection should be rejected."""


@dataclass(frozen=True)
class EventReport:
    v: int
    seq: int
    driver_id: str
    type: str  # "crash" | "pothole"
    t: int  # ms since epoch
    lat: float
    lon: float
    speed_kmh: float
    max_axis: str  # "x" | "y" | "z"
    g_force: float
    magnitude_pct: float
    collision: Optional[str]  # null for potholes


@dataclass(frozen=True)
class Ack:
    ack: int


@dataclass(frozen=True)
class ErrorFrame:
    err: str
    seq: int


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v: Any) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and math.isfinite(v)


def validate_report(r: EventReport) -> None:
    """Raise ValidationError naming the first offending field."""
    if not _is_int(r.v):
        raise ValidationError("v", "must be an integer")
    if r.v != PROTOCOL_VERSION:
        raise VersionError("v", f"unknown protocol version {r.v}")
    if not _is_int(r.seq) or r.seq < 1:
        raise ValidationError("seq", "must be an integer >= 1")
    if not isinstance(r.driver_id, str) or not r.driver_id:
        raise ValidationError("driver_id", "must be a non-empty string")
    if r.type not in EVENT_TYPES:
        raise ValidationError("type", f"unknown type {r.type!r}")
    if not _is_int(r.t) or r.t < 0:
        raise ValidationError("t", "must be a non-negative integer")
    if not _is_num(r.lat) or not -90.0 <= r.lat <= 90.0:
        raise ValidationError("lat", "must be in [-90, 90]")
    if not _is_num(r.lon) or not -180.0 <= r.lon <= 180.0:
        raise ValidationError("lon", "must be in [-180, 180]")
    if not _is_num(r.speed_kmh) or r.speed_kmh < 0:
        raise ValidationError("speed_kmh", "must be >= 0")
    if r.max_axis not in ("x", "y", "z"):
        raise ValidationError("max_axis", "must be one of x, y, z")
    if not _is_num(r.g_force) or r.g_force < 0:
        raise ValidationError("g_force", "must be >= 0")
    if not _is_num(r.magnitude_pct) or r.magnitude_pct < 0:
        raise ValidationError("magnitude_pct", "must be >= 0")
    if r.collision is not None and r.collision not in COLLISION_CLASSES:
        raise ValidationError("collision", f"unknown collision class {r.collision!r}")
    if r.type == "pothole":
        if r.collision is not None:
            raise ValidationError("collision", "must be null for potholes")
        if r.max_axis != "z":
            raise ValidationError("max_axis", "must be z for potholes")


def _wire_num(v: Union[int, float]) -> Union[int, float]:
    # integral floats go out as JSON integers; precision is otherwise
    # preserved in full by the shortest round-trip float form
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def encode_report(r: EventReport) -> bytes:
    """Encode a valid report as one newline-terminated frame."""
    validate_report(r)
    obj = {name: getattr(r, name) for name in _FIELD_ORDER}
    for name in ("lat", "lon", "speed_kmh", "g_force", "magnitude_pct"):
        obj[name] = _wire_num(obj[name])
    return json.dumps(obj, separators=(",", ":"), allow_nan=False).encode() + b"\n"


def _reject_constant(name: str) -> None:
    raise ValueError(f"{name} is not valid JSON")


def _parse_obj(frame: Union[bytes, str]) -> dict:
    if isinstance(frame, bytes):
        try:
            frame = frame.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"not UTF-8: {e}") from None
    try:
        obj = json.loads(frame, parse_constant=_reject_constant)
    except ValueError as e:
        raise ParseError(str(e)) from None
    if not isinstance(obj, dict):
        raise ParseError("frame is not a JSON object")
    return obj


def decode_report(frame: Union[bytes, str]) -> EventReport:
    """Parse and validate one frame; unknown extra fields are ignored."""
    obj = _parse_obj(frame)
    seq_hint = obj.get("seq")
    seq_hint = seq_hint if _is_int(seq_hint) else 0

    def fail(field: str, detail: str) -> ValidationError:
        return ValidationError(field, detail, seq=seq_hint)

    values: dict[str, Any] = {}
    for name in _FIELD_ORDER:
        if name not in obj:
            raise fail(name, "missing")
        values[name] = obj[name]
    for name in ("v", "seq", "t"):
        v = values[name]
        if isinstance(v, float) and v.is_integer():
            v = int(v)
        if not _is_int(v):
            raise fail(name, "must be an integer")
        values[name] = v
    for name in ("lat", "lon", "speed_kmh", "g_force", "magnitude_pct"):
        v = values[name]
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            raise fail(name, "must be a number")
        values[name] = float(v)
    for name in ("driver_id", "type", "max_axis"):
        if not isinstance(values[name], str):
            raise fail(name, "must be a string")
    if values["collision"] is not None and not isinstance(values["collision"], str):
        raise fail("collision", "must be a string or null")

    report = EventReport(**values)
    try:
        validate_report(report)
    except ValidationError as e:
        e.seq = seq_hint
        raise
    return report


def encode_ack(seq: int) -> bytes:
    return json.dumps({"ack": seq}, separators=(",", ":")).encode() + b"\n"


def encode_error(field: str, seq: int = 0) -> bytes:
    return json.dumps({"err": field, "seq": seq}, separators=(",", ":")).encode() + b"\n"


def decode_server_frame(frame: Union[bytes, str]) -> Union[Ack, ErrorFrame]:
    """Parse a server reply: an ack or an error frame."""
    obj = _parse_obj(frame)
    if _is_int(obj.get("ack")):
        return Ack(obj["ack"])
    if isinstance(obj.get("err"), str):
        seq = obj.get("seq")
        return ErrorFrame(obj["err"], seq if _is_int(seq) else 0)
    raise ParseError("server frame has neither ack nor err")


def report_from_event(event: DetectedEvent, seq: int, full_scale_g: float) -> EventReport:
    """Assemble the wire report for a detected event."""
    if event.kind is EventKind.CRASH:
        s = event.summary
        max_axis, g_force, pct = s.max_axis, s.g_force, s.magnitude_pct
        collision = s.collision.value
    else:
        peak = float(event.summary)
        max_axis, g_force, pct = "z", peak, 100.0 * peak / full_scale_g
        collision = None
    return EventReport(
        v=PROTOCOL_VERSION,
        seq=seq,
        driver_id=event.driver_id,
        type=event.kind.value,
        t=event.t,
        lat=event.fix.lat,
        lon=event.fix.lon,
        speed_kmh=event.speed_kmh,
        max_axis=max_axis,
        g_force=g_force,
        magnitude_pct=pct,
        collision=collision,
    )
