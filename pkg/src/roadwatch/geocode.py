"""Reverse geocoding: offline gazetteer lookup with an external HTTP option.

Geocoding must never block emergency dispatch, so every path degrades to a
coordinate fallback string instead of raising.
"""

from __future__ import annotations

import csv
import json
import math
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Union

EARTH_RADIUS_M = 6371000.0
GAZETTEER_HEADER = "name,lat,lon"
DEFAULT_RADIUS_M = 250.0


class GazetteerError(ValueError):
    pass


@dataclass(frozen=True)
class GeocodeResult:
    address: str
    source: str  # "gazetteer" | "fallback" | "external"


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = math.radians(lat2 - lat1)
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def fallback_address(lat: float, lon: float) -> str:
    return f"near {lat:.5f},{lon:.5f}"


def _check_range(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise ValueError(f"coordinates out of range: {lat},{lon}")


class Gazetteer:
    """Named locations from a ``name,lat,lon`` CSV; file order breaks ties."""

    def __init__(self, entries: list[tuple[str, float, float]]):
        self.entries = entries

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Gazetteer":
        entries = []
        with open(path, "r", encoding="utf-8", newline="") as fh:
            header = fh.readline().rstrip("\r\n")
            if header != GAZETTEER_HEADER:
                raise GazetteerError(f"gazetteer header must be {GAZETTEER_HEADER!r}")
            for lineno, row in enumerate(csv.reader(fh), start=2):
                if not row:
                    continue
                if len(row) != 3:
                    raise GazetteerError(f"line {lineno}: expected 3 columns")
                try:
                    entries.append((row[0], float(row[1]), float(row[2])))
                except ValueError:
                    raise GazetteerError(f"line {lineno}: bad coordinates") from None
        return cls(entries)

    def nearest(self, lat: float, lon: float) -> tuple[str, float] | None:
        best = None
        for name, elat, elon in self.entries:
            d = haversine_m(lat, lon, elat, elon)
            if best is None or d < best[1]:
                best = (name, d)
        return best


class GazetteerGeocoder:
    def __init__(self, gazetteer: Gazetteer, radius_m: float = DEFAULT_RADIUS_M):
        self.gazetteer = gazetteer
        self.radius_m = radius_m

    def reverse_geocode(self, lat: float, lon: float) -> GeocodeResult:
        _check_range(lat, lon)
        hit = self.gazetteer.nearest(lat, lon)
        if hit is not None and hit[1] <= self.radius_m:
            return GeocodeResult(hit[0], "gazetteer")
        return GeocodeResult(fallback_address(lat, lon), "fallback")


class ExternalHttpGeocoder:
    """Delegates to ``GET <base_url>?lat=..&lon=..`` expecting ``{"address": ...}``."""

    def __init__(self, base_url: str, timeout_s: float = 2.0):
        self.base_url = base_url
        self.timeout_s = timeout_s

    def reverse_geocode(self, lat: float, lon: float) -> GeocodeResult:
        _check_range(lat, lon)
        query = urllib.parse.urlencode({"lat": lat, "lon": lon})
        url = f"{self.base_url}?{query}"
        try:
            with urllib.request.urlopen(url, timeout=self.timeout_s) as resp:
                obj = json.loads(resp.read().decode("utf-8"))
            address = obj["address"]
            if not isinstance(address, str) or not address:
                raise ValueError("empty address")
            return GeocodeResult(address, "external")
        except Exception:
            return GeocodeResult(fallback_address(lat, lon), "fallback")
