"""Locating (and optionally downloading) the BIDMC record-20 numerics file.

Tests never hit the network. They look for a vendored copy at
``tests/data/bidmc_20_Numerics.csv`` or at the path in ``$PULSEWATCH_BIDMC_CSV``.
"""

from __future__ import annotations

import os
import urllib.request
from pathlib import Path

from .persist import atomic_write, sha256_bytes

BIDMC_ENV = "PULSEWATCH_BIDMC_CSV"
BIDMC_FILENAME = "bidmc_20_Numerics.csv"
BIDMC_URL = "https://physionet.org/files/bidmc/1.0.0/bidmc_csv/bidmc_20_Numerics.csv"


def find_bidmc(search_dirs=()) -> Path | None:
    env = os.environ.get(BIDMC_ENV)
    if env and Path(env).is_file():
        return Path(env)
    for d in search_dirs:
        candidate = Path(d) / BIDMC_FILENAME
        if candidate.is_file():
            return candidate
    return None


def fetch_bidmc(dest, url: str = BIDMC_URL, timeout: float = 30.0) -> str:
    """Download the record into ``dest`` and return its SHA-256."""
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        data = resp.read()
    atomic_write(dest, data)
    return sha256_bytes(data)
