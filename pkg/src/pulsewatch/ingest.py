"""Numerics CSV ingestion, stream replay and synthetic ADL pulse traces.

The CSV layout follows the PhysioNet BIDMC ``*_Numerics.csv`` exports::

    Time [s], HR, PULSE, RESP, SpO2
    0,93,92,17,97
    1,93,92,17,97

Rows with gaps are kept; downstream consumers drop missing vitals per use.
"""

from __future__ import annotations

import csv
import io
import math
import re
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    EmptyInputError,
    EmptyProfileListError,
    MissingHeaderError,
    NonMonotonicTimeError,
    UnknownColumnLayoutError,
)

__all__ = [
    "PulseSample",
    "AdlProfile",
    "ACTIVITIES",
    "parse_numerics_csv",
    "read_numerics_csv",
    "to_csv",
    "replay_stream",
    "synth_adl",
]

VITALS = ("hr", "pulse", "resp", "spo2")

ACTIVITIES = ("rest", "walk", "jump", "hop", "swim", "exercise", "sleep")

_MISSING_TOKENS = {"", "nan", "na", "n/a", "null", "none", "-", "?"}

# normalized header text -> field name
_HEADER_ALIASES = {
    "time": "t",
    "t": "t",
    "elapsed time": "t",
    "hr": "hr",
    "heart rate": "hr",
    "pulse": "pulse",
    "pulse rate": "pulse",
    "pr": "pulse",
    "resp": "resp",
    "resp rate": "resp",
    "respiration": "resp",
    "respiration rate": "resp",
    "respiratory rate": "resp",
    "spo2": "spo2",
    "sp o2": "spo2",
    "spo2 %": "spo2",
}

_RANGES = {"hr": (0.0, 300.0), "pulse": (0.0, 300.0), "spo2": (0.0, 100.0)}


@dataclass(frozen=True, slots=True)
class PulseSample:
    """One telemetry row. Missing vitals are ``None``."""

    t: float
    hr: float | None = None
    pulse: float | None = None
    resp: float | None = None
    spo2: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.t) and self.t >= 0):
            raise ValueError(f"sample time must be finite and >= 0, got {self.t!r}")
        for name in VITALS:
            v = getattr(self, name)
            if v is None:
                continue
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            lo, hi = _RANGES.get(name, (-math.inf, math.inf))
            if not lo <= v <= hi:
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    def vitals(self):
        return tuple(getattr(self, name) for name in VITALS)


@dataclass(frozen=True, slots=True)
class AdlProfile:
    activity: str
    mean: float
    sd: float
    duration: float

    def __post_init__(self):
        if self.activity not in ACTIVITIES:
            raise ValueError(f"unknown activity {self.activity!r}; expected one of {ACTIVITIES}")
        if not 30.0 <= self.mean <= 220.0:
            raise ValueError(f"mean pulse {self.mean} outside [30, 220]")
        if not self.sd >= 0:
            raise ValueError("sd must be >= 0")
        if not self.duration > 0:
            raise ValueError("duration must be > 0")


def _normalize_header(cell: str) -> str:
    text = re.sub(r"\[[^\]]*\]|\([^)]*\)", " ", cell)
    return " ".join(text.strip().lower().split())


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _parse_cell(text: str) -> float | None:
    text = text.strip()
    if text.lower() in _MISSING_TOKENS:
        return None
    try:
        value = float(text)
    except ValueError:
        return None
    if not math.isfinite(value):
        return None
    return value


def _parse_vital(name: str, text: str) -> float | None:
    value = _parse_cell(text)
    if value is None:
        return None
    lo, hi = _RANGES.get(name, (-math.inf, math.inf))
    if not lo <= value <= hi:
        return None
    return value


def parse_numerics_csv(raw: bytes | str, source: str | None = None) -> list[PulseSample]:
    """Parse a numerics CSV into an ordered list of samples.

    Empty, non-numeric, non-finite and out-of-range vitals become ``None``.
    Rows whose time cell is missing or unparseable are dropped. Without a
    time column the rows are assumed to be 1 s apart.
    """
    text = raw.decode("utf-8-sig") if isinstance(raw, (bytes, bytearray)) else raw
    reader = csv.reader(io.StringIO(text, newline=""))

    header = None
    header_line = 0
    for row in reader:
        if any(cell.strip() for cell in row):
            header = row
            header_line = reader.line_num
            break
    if header is None:
        raise MissingHeaderError("input is empty", line=1, source=source)
    cells = [c.strip() for c in header if c.strip()]
    if all(_is_number(c) for c in cells):
        raise MissingHeaderError("first row is data, not a header", line=header_line, source=source)

    columns: dict[str, int] = {}
    for idx, cell in enumerate(header):
        field = _HEADER_ALIASES.get(_normalize_header(cell))
        if field is not None and field not in columns:
            columns[field] = idx
    if not any(f in columns for f in VITALS):
        raise UnknownColumnLayoutError(
            f"no HR/PULSE/RESP/SpO2 columns in header {header!r}", line=header_line, source=source
        )

    def cell(row, field):
        idx = columns.get(field)
        if idx is None or idx >= len(row):
            return ""
        return row[idx]

    samples: list[PulseSample] = []
    data_index = 0
    last_t = -math.inf
    for row in reader:
        if not any(c.strip() for c in row):
            continue
        if "t" in columns:
            t = _parse_cell(cell(row, "t"))
            if t is None or t < 0:
                continue
        else:
            t = float(data_index)
        data_index += 1
        if t <= last_t:
            raise NonMonotonicTimeError(
                f"time {t} does not increase (previous {last_t})", line=reader.line_num, source=source
            )
        last_t = t
        samples.append(PulseSample(t, *(_parse_vital(name, cell(row, name)) for name in VITALS)))
    return samples


def read_numerics_csv(path) -> list[PulseSample]:
    with open(path, "rb") as fh:
        return parse_numerics_csv(fh.read(), source=str(path))


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def to_csv(samples: Iterable[PulseSample]) -> bytes:
    """Serialize samples back to the numerics CSV layout (LF line endings)."""
    lines = ["Time [s],HR,PULSE,RESP,SpO2"]
    for s in samples:
        lines.append(",".join(_fmt(v) for v in (s.t, *s.vitals())))
    return ("\n".join(lines) + "\n").encode("utf-8")


def replay_stream(
    samples: Sequence[PulseSample],
    speed: float = math.inf,
    *,
    clock=time.monotonic,
    sleep=time.sleep,
) -> Iterator[PulseSample]:
    """Yield samples in order, paced at ``speed`` times real time.

    ``speed=math.inf`` is offline mode: no pacing at all.
    """
    if len(samples) == 0:
        raise EmptyInputError("cannot replay an empty sample list")
    if not speed > 0:
        raise ValueError("speed must be positive")
    return _replay(list(samples), speed, clock, sleep)


def _replay(samples, speed, clock, sleep):
    t0 = samples[0].t
    start = clock()
    for s in samples:
        if math.isfinite(speed):
            due = start + (s.t - t0) / speed
            wait = due - clock()
            if wait > 0:
                sleep(wait)
        yield s


def synth_adl(profiles: Sequence[AdlProfile], seed: int, dt: float = 1.0) -> list[PulseSample]:
    """Generate a pulse trace with one normally distributed segment per profile.

    Pulse values are clamped to [30, 220]. Only ``pulse`` is populated.
    """
    if not profiles:
        raise EmptyProfileListError("need at least one ADL profile")
    if not dt > 0:
        raise ValueError("dt must be positive")
    rng = np.random.default_rng(seed)
    out: list[PulseSample] = []
    for p in profiles:
        # exact ratio: 10 / 0.1 is 100.00000000000001 in floating point
        n = math.ceil(Fraction(p.duration) / Fraction(dt))
        pulses = np.clip(rng.normal(p.mean, p.sd, n), 30.0, 220.0)
        base = len(out)
        out.extend(PulseSample(t=(base + i) * dt, pulse=float(v)) for i, v in enumerate(pulses))
    return out
