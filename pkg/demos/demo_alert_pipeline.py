"""
From alert to SMS bytes
=======================

Pick the latest usable GPS fix out of a raw NMEA log, compose the alert and
push it through a simulated GSM modem that refuses the first attempt.
"""

import datetime as dt
from pathlib import Path

from pulsewatch.alerting import SimulatedModem, compose_sms, dispatch
from pulsewatch.detector import AlertTrigger
from pulsewatch.errors import NmeaError
from pulsewatch.geoloc import FixRegister, parse_nmea_sentence

ROOT = Path(__file__).resolve().parents[1]

register = FixRegister()
for line in (ROOT / "tests" / "data" / "nmea_valid.log").read_bytes().splitlines():
    try:
        item = parse_nmea_sentence(line)
    except NmeaError as exc:
        print(f"  rejected: {type(exc).__name__}: {exc}")
        continue
    register.update(item)
fix = register.get()
print(f"latest fix: {fix.lat:.6f}, {fix.lon:.6f} at {fix.utc} UTC")

###############################################################################
# The trigger normally comes from the detector; here it is written by hand.

trigger = AlertTrigger(t=70.0, rr_t1=9.41, rr_t2=28.17, tau=19.51)
msg = compose_sms(trigger, fix, "BAND-0001", epoch=dt.datetime(2026, 3, 15, 10, 0, tzinfo=dt.timezone.utc))
print(f"{len(msg.body)} chars: {msg.body}")

###############################################################################
# Two contacts, the first being the helpline. The modem script refuses the
# first CMGS, so the helpline takes two attempts.

modem = SimulatedModem(script=[False])
for rec in dispatch(msg, ["+911234567890", "+14155550123"], modem, max_retries=2):
    print(f"{rec.recipient}: {rec.outcome} after {rec.attempts} attempt(s)")
    print("   ", rec.transcript)
