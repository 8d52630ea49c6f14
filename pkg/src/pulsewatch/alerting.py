"""Emergency SMS composition and GSM text-mode AT framing.

Host-to-modem framing, byte for byte::

    AT+CMGF=1<CR>                 modem: <CR><LF>OK<CR><LF>
    AT+CMGS="<E.164>"<CR>         modem: <CR><LF>>
    <body bytes><0x1A>            modem: <CR><LF>+CMGS: <n><CR><LF><CR><LF>OK<CR><LF>

A refused send is answered with ``<CR><LF>ERROR<CR><LF>`` in place of the
prompt, so a failed attempt never puts a Ctrl-Z on the wire.
"""

from __future__ import annotations

import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .detector import AlertTrigger
from .errors import (
    DeviceIdTooLongError,
    FramingError,
    InvalidDeviceIdError,
    InvalidRecipientError,
    NoContactsError,
)
from .geoloc import GeoFix, NoFixAvailable

__all__ = [
    "AlertMessage",
    "DeliveryRecord",
    "SimulatedModem",
    "GSM7_ASCII",
    "MAX_SMS_LEN",
    "MAX_DEVICE_ID_LEN",
    "compose_sms",
    "emit_at_commands",
    "decode_at_frame",
    "dispatch",
    "is_gsm7",
]

MAX_SMS_LEN = 160
MAX_DEVICE_ID_LEN = 20
MAP_URL = "https://maps.google.com/?q={lat:.6f},{lon:.6f}"
EPOCH = dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc)

CTRL_Z = b"\x1a"
CR = b"\r"
OK_LINE = b"\r\nOK\r\n"
PROMPT = b"\r\n> "
ERROR_LINE = b"\r\nERROR\r\n"

# ASCII characters whose GSM 03.38 basic-table code point exists (text mode maps them 1:1)
GSM7_ASCII = frozenset(
    "@$\n\r _!\"#%&'()*+,-./0123456789:;<=>?"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
)

_E164 = re.compile(r"^\+\d{8,15}$")


def is_gsm7(text: str) -> bool:
    return all(ch in GSM7_ASCII for ch in text)


@dataclass(frozen=True)
class AlertMessage:
    device_id: str
    t: float
    time_text: str
    lat: float | None
    lon: float | None
    map_url: str | None
    reason: str
    body: str
    fix_utc: str | None = None

    def __post_init__(self):
        if len(self.body) > MAX_SMS_LEN or not is_gsm7(self.body):
            raise ValueError("SMS body must be <= 160 GSM 7-bit characters")
        if (self.map_url is None) != (self.lat is None or self.lon is None):
            raise ValueError("map_url must be present exactly when coordinates are")


@dataclass
class DeliveryRecord:
    recipient: str
    attempts: int
    outcome: str  # "Delivered" or "Failed"
    transcript: bytes = field(repr=False)


def _time_text(t: float, epoch: dt.datetime) -> str:
    stamp = epoch + dt.timedelta(seconds=t)
    return stamp.astimezone(dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def compose_sms(
    trigger: AlertTrigger,
    fix: GeoFix | NoFixAvailable,
    device_id: str,
    epoch: dt.datetime = EPOCH,
) -> AlertMessage:
    """Build the alert SMS. The body is never truncated.

    ``epoch`` anchors stream time to a wall-clock instant so output does not
    depend on when the run happened.
    """
    if len(device_id) > MAX_DEVICE_ID_LEN:
        raise DeviceIdTooLongError(f"device id longer than {MAX_DEVICE_ID_LEN} characters")
    if not device_id or not is_gsm7(device_id) or any(c in device_id for c in "\r\n"):
        raise InvalidDeviceIdError(f"device id {device_id!r} must be non-empty GSM 7-bit text")

    when = _time_text(trigger.t, epoch)
    if isinstance(fix, GeoFix) and fix.valid:
        lat, lon = fix.lat, fix.lon
        url = MAP_URL.format(lat=lat, lon=lon)
        loc = url
        fix_utc = fix.utc
    else:
        lat = lon = url = fix_utc = None
        loc = "unavailable"
    body = f"EMERGENCY {device_id} abnormal heart activity at {when}. Loc: {loc}"
    return AlertMessage(
        device_id=device_id,
        t=trigger.t,
        time_text=when,
        lat=lat,
        lon=lon,
        map_url=url,
        reason=trigger.reason,
        body=body,
        fix_utc=fix_utc,
    )


def _check_recipient(recipient: str) -> None:
    if not isinstance(recipient, str) or not _E164.match(recipient):
        raise InvalidRecipientError(f"{recipient!r} is not an E.164 number (+ and 8-15 digits)")


def _frames(body: str, recipient: str) -> tuple[bytes, bytes, bytes]:
    _check_recipient(recipient)
    if not is_gsm7(body):
        raise FramingError("body contains characters outside the GSM 7-bit ASCII subset")
    return (
        b"AT+CMGF=1" + CR,
        b'AT+CMGS="' + recipient.encode("ascii") + b'"' + CR,
        body.encode("ascii") + CTRL_Z,
    )


def emit_at_commands(msg: AlertMessage | str, recipient: str) -> bytes:
    """Host-side bytes for sending ``msg`` to ``recipient`` in text mode."""
    body = msg.body if isinstance(msg, AlertMessage) else msg
    return b"".join(_frames(body, recipient))


_FRAME = re.compile(rb'\AAT\+CMGF=1\rAT\+CMGS="(\+\d{8,15})"\r(.*)\x1a\Z', re.DOTALL)


def decode_at_frame(data: bytes) -> tuple[str, str]:
    """Inverse of :func:`emit_at_commands`: recover ``(recipient, body)``."""
    m = _FRAME.match(data)
    if m is None or CTRL_Z in m.group(2):
        raise FramingError("bytes are not a single CMGF/CMGS text-mode frame")
    return m.group(1).decode("ascii"), m.group(2).decode("ascii")


class SimulatedModem:
    """Scripted stand-in for a GSM modem with echo disabled.

    ``script`` yields one boolean per CMGS attempt: ``True`` accepts the
    message, ``False`` refuses it with ``ERROR``. Once exhausted every
    further attempt succeeds.
    """

    def __init__(self, script: Iterable[bool] = ()):
        self._script = iter(script)
        self._pending: str | None = None
        self._refs = 0
        self.outbox: list[tuple[str, str]] = []

    def exchange(self, data: bytes) -> bytes:
        if data == b"AT+CMGF=1" + CR:
            return OK_LINE
        m = re.fullmatch(rb'AT\+CMGS="([^"]*)"\r', data)
        if m is not None:
            if not next(self._script, True):
                self._pending = None
                return ERROR_LINE
            self._pending = m.group(1).decode("ascii")
            return PROMPT
        if data.endswith(CTRL_Z) and self._pending is not None:
            self.outbox.append((self._pending, data[:-1].decode("ascii")))
            self._pending = None
            self._refs += 1
            return b"\r\n+CMGS: %d\r\n" % self._refs + OK_LINE
        return ERROR_LINE


def _attempt(channel, frames, log: bytearray) -> bool:
    cmgf, cmgs, payload = frames
    for out, expect in ((cmgf, OK_LINE), (cmgs, PROMPT)):
        log += out
        reply = channel.exchange(out)
        log += reply
        if not reply.endswith(expect):
            return False
    log += payload
    reply = channel.exchange(payload)
    log += reply
    return reply.endswith(OK_LINE)


def dispatch(
    msg: AlertMessage, contacts: Sequence[str], channel, max_retries: int = 2
) -> list[DeliveryRecord]:
    """Send ``msg`` to each contact in order, retrying refused sends.

    The first contact doubles as the helpline. Returns one record per contact.
    """
    if not contacts:
        raise NoContactsError("at least one contact is required")
    if max_retries < 0:
        raise ValueError("max_retries must be >= 0")
    records = []
    for recipient in contacts:
        frames = _frames(msg.body, recipient)
        log = bytearray()
        attempts = 0
        delivered = False
        while attempts <= max_retries and not delivered:
            attempts += 1
            delivered = _attempt(channel, frames, log)
        records.append(
            DeliveryRecord(recipient, attempts, "Delivered" if delivered else "Failed", bytes(log))
        )
    return records
