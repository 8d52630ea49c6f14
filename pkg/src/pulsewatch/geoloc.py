"""NMEA 0183 GGA/RMC decoding and the latest-fix register."""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .errors import BadChecksumError, MalformedFieldsError

__all__ = [
    "Quality",
    "GeoFix",
    "SkippedSentence",
    "NO_FIX",
    "NoFixAvailable",
    "checksum",
    "parse_nmea_sentence",
    "format_gga",
    "latest_fix",
    "FixRegister",
    "utc_seconds",
]


class Quality(str, Enum):
    NO_FIX = "NoFix"
    GPS = "GpsFix"
    DGPS = "DgpsFix"


@dataclass(frozen=True)
class GeoFix:
    """Decoded position. ``lat``/``lon`` may be ``None`` only for NoFix."""

    lat: float | None
    lon: float | None
    utc: str
    quality: Quality
    source: str  # "GGA" or "RMC"

    def __post_init__(self):
        if self.quality is not Quality.NO_FIX:
            if self.lat is None or self.lon is None:
                raise ValueError("a fix needs coordinates")
        if self.lat is not None and not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range")
        if self.lon is not None and not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range")

    @property
    def valid(self) -> bool:
        return self.quality is not Quality.NO_FIX


@dataclass(frozen=True)
class SkippedSentence:
    talker_type: str
    reason: str = "unsupported sentence type"


class NoFixAvailable:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NO_FIX"

    def __bool__(self):
        return False


NO_FIX = NoFixAvailable()

_SUPPORTED = {"GPGGA", "GNGGA", "GPRMC", "GNRMC"}
_LAT = re.compile(r"^(\d{2})(\d{2}(?:\.\d+)?)$")
_LON = re.compile(r"^(\d{3})(\d{2}(?:\.\d+)?)$")
_UTC = re.compile(r"^(\d{2})(\d{2})(\d{2}(?:\.\d+)?)$")
_HEX2 = re.compile(r"^[0-9A-Fa-f]{2}$")


def checksum(body: bytes | str) -> int:
    """XOR of every byte between ``$`` and ``*``."""
    if isinstance(body, str):
        body = body.encode("utf-8")
    value = 0
    for b in body:
        value ^= b
    return value


def _coord(value: str, hemi: str, pattern, pos: str, neg: str, limit: float) -> float:
    m = pattern.match(value)
    if m is None:
        raise MalformedFieldsError(f"bad coordinate {value!r}")
    degrees, minutes = int(m.group(1)), float(m.group(2))
    if minutes >= 60.0:
        raise MalformedFieldsError(f"minutes out of range in {value!r}")
    result = degrees + minutes / 60.0
    if result > limit:
        raise MalformedFieldsError(f"coordinate {value!r} exceeds {limit} degrees")
    if hemi == neg:
        return -result
    if hemi != pos:
        raise MalformedFieldsError(f"bad hemisphere {hemi!r}")
    return result


def _utc(value: str, required: bool) -> str:
    if value == "" and not required:
        return ""
    m = _UTC.match(value)
    if m is None or int(m.group(1)) > 23 or int(m.group(2)) > 59 or float(m.group(3)) >= 61:
        raise MalformedFieldsError(f"bad UTC time {value!r}")
    return value


def _parse_gga(fields, kind):
    if len(fields) != 15:
        raise MalformedFieldsError(f"GGA needs 15 fields, got {len(fields)}")
    q = fields[6]
    if not q.isdigit():
        raise MalformedFieldsError(f"bad fix quality {q!r}")
    quality = {0: Quality.NO_FIX, 2: Quality.DGPS}.get(int(q), Quality.GPS)
    if quality is Quality.NO_FIX and not fields[2]:
        return GeoFix(None, None, _utc(fields[1], False), quality, kind)
    lat = _coord(fields[2], fields[3], _LAT, "N", "S", 90.0)
    lon = _coord(fields[4], fields[5], _LON, "E", "W", 180.0)
    return GeoFix(lat, lon, _utc(fields[1], quality is not Quality.NO_FIX), quality, kind)


def _parse_rmc(fields, kind):
    if not 12 <= len(fields) <= 14:
        raise MalformedFieldsError(f"RMC needs 12-14 fields, got {len(fields)}")
    status = fields[2]
    if status not in ("A", "V"):
        raise MalformedFieldsError(f"bad RMC status {status!r}")
    quality = Quality.GPS if status == "A" else Quality.NO_FIX
    if quality is Quality.NO_FIX and not fields[3]:
        return GeoFix(None, None, _utc(fields[1], False), quality, kind)
    lat = _coord(fields[3], fields[4], _LAT, "N", "S", 90.0)
    lon = _coord(fields[5], fields[6], _LON, "E", "W", 180.0)
    return GeoFix(lat, lon, _utc(fields[1], quality is not Quality.NO_FIX), quality, kind)


def parse_nmea_sentence(line: bytes | str) -> GeoFix | SkippedSentence:
    """Decode one line.

    Raises :class:`BadChecksumError` when the stated and computed checksums
    differ and :class:`MalformedFieldsError` for structurally broken
    sentences. Lines that are not GGA/RMC come back as
    :class:`SkippedSentence`.
    """
    if isinstance(line, str):
        line = line.encode("utf-8", errors="surrogatepass")
    line = line.rstrip(b"\r\n")
    if not line.startswith(b"$"):
        return SkippedSentence("", "not an NMEA sentence")
    star = line.rfind(b"*")
    if star < 0:
        raise MalformedFieldsError("missing checksum")
    body, stated = line[1:star], line[star + 1 :]
    if not _HEX2.match(stated.decode("latin-1")):
        raise MalformedFieldsError(f"bad checksum field {stated!r}")
    computed = checksum(body)
    if computed != int(stated, 16):
        raise BadChecksumError(f"checksum {stated.decode()} != computed {computed:02X}")

    # checksum passed, so the body is what the sender meant; it must still be ASCII
    try:
        text = body.decode("ascii")
    except UnicodeDecodeError:
        raise MalformedFieldsError("non-ASCII sentence body") from None
    fields = text.split(",")
    kind = fields[0]
    if kind not in _SUPPORTED:
        return SkippedSentence(kind)
    if kind.endswith("GGA"):
        return _parse_gga(fields, "GGA")
    return _parse_rmc(fields, "RMC")


def _ddmm(value: float, width: int) -> str:
    value = abs(value)
    degrees = int(value)
    minutes = round((value - degrees) * 60.0, 6)
    if minutes >= 60.0:
        degrees, minutes = degrees + 1, 0.0
    return f"{degrees:0{width}d}{minutes:09.6f}"


def format_gga(fix: GeoFix, satellites: int = 8, hdop: float = 0.9, altitude: float = 0.0) -> str:
    """Render ``fix`` as a checksummed ``$GPGGA`` sentence (no line ending)."""
    quality = {Quality.NO_FIX: 0, Quality.GPS: 1, Quality.DGPS: 2}[fix.quality]
    if fix.lat is None:
        lat = lon = ns = ew = ""
    else:
        lat, ns = _ddmm(fix.lat, 2), "N" if fix.lat >= 0 else "S"
        lon, ew = _ddmm(fix.lon, 3), "E" if fix.lon >= 0 else "W"
    body = (
        f"GPGGA,{fix.utc},{lat},{ns},{lon},{ew},{quality},{satellites:02d},"
        f"{hdop:.1f},{altitude:.1f},M,0.0,M,,"
    )
    return f"${body}*{checksum(body):02X}"


def utc_seconds(utc: str) -> float | None:
    """Seconds since midnight for an ``hhmmss(.sss)`` field."""
    m = _UTC.match(utc or "")
    if m is None:
        return None
    return int(m.group(1)) * 3600 + int(m.group(2)) * 60 + float(m.group(3))


def latest_fix(history: Iterable[GeoFix | SkippedSentence]) -> GeoFix | NoFixAvailable:
    """Most recent fix whose quality is not NoFix."""
    found = NO_FIX
    for item in history:
        if isinstance(item, GeoFix) and item.valid:
            found = item
    return found


class FixRegister:
    """Single-writer, multi-reader cell holding the latest usable fix.

    Fixes are immutable and rebinding an attribute is atomic, so readers see
    either the old or the new fix, never a mix.
    """

    def __init__(self):
        self._fix: GeoFix | NoFixAvailable = NO_FIX

    def update(self, item) -> None:
        if isinstance(item, GeoFix) and item.valid:
            self._fix = item

    def get(self) -> GeoFix | NoFixAvailable:
        return self._fix
