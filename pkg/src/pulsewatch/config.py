"""Application configuration: a JSON document plus command-line overrides."""

from __future__ import annotations

import datetime as dt
import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .detector import DetectorConfig
from .errors import PulseWatchError
from .model import DEFAULT_RESTARTS, PREPROCESSING

__all__ = ["AppConfig", "ConfigError", "CONFIG_ENV", "load_config"]

CONFIG_ENV = "PULSEWATCH_CONFIG"


class ConfigError(PulseWatchError, ValueError):
    pass


@dataclass(frozen=True)
class AppConfig:
    # detector overrides; None means "use the detector default"
    window: float | None = None
    abnormal_band: float | None = None
    flutter_delta: float | None = None
    confirm_windows: int | None = None
    cooldown: float | None = None
    adl_gating: bool = False
    # clustering
    ks: tuple[int, ...] = (3, 5)
    seed: int = 0
    restarts: int = DEFAULT_RESTARTS
    standardize: bool = False
    preprocessing: str = "none"
    # alerting
    contacts: tuple[str, ...] = ()
    device_id: str = "BAND-0001"
    epoch: str | None = None
    max_retries: int = 2
    modem_script: tuple[bool, ...] = ()
    # paths
    dataset: str | None = None
    nmea: str | None = None
    model: str | None = None
    pulse: str | None = None
    out_dir: str = "runs"
    label: str = "run"

    def __post_init__(self):
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigError("ks must list cluster counts >= 1")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.preprocessing not in PREPROCESSING:
            raise ConfigError(f"preprocessing must be one of {PREPROCESSING}")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if not self.label or "/" in self.label or self.label in (".", ".."):
            raise ConfigError(f"invalid run label {self.label!r}")
        try:
            self.detector_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.epoch_datetime()

    def detector_config(self) -> DetectorConfig:
        overrides = {
            name: getattr(self, name)
            for name in ("window", "abnormal_band", "flutter_delta", "confirm_windows", "cooldown")
            if getattr(self, name) is not None
        }
        return DetectorConfig(adl_gating=self.adl_gating, **overrides)

    def epoch_datetime(self) -> dt.datetime | None:
        if self.epoch is None:
            return None
        try:
            stamp = dt.datetime.fromisoformat(self.epoch.replace("Z", "+00:00"))
        except ValueError:
            raise ConfigError(f"epoch {self.epoch!r} is not an ISO-8601 timestamp") from None
        if stamp.tzinfo is None:
            stamp = stamp.replace(tzinfo=dt.timezone.utc)
        return stamp

    def run_dir(self) -> Path:
        return Path(self.out_dir) / self.label

    def merged(self, **overrides) -> "AppConfig":
        """Copy with every non-None override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_dict(cls, d: dict) -> "AppConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("ks", "contacts", "modem_script"):
            if key in d:
                d[key] = tuple(d[key])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path=None) -> AppConfig:
    """Read the config file named by ``path`` or ``$PULSEWATCH_CONFIG``."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return AppConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return AppConfig.from_dict(data)
