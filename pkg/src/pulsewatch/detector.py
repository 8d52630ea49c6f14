"""Streaming two-condition detector.

Pulse samples are converted to resting rate through the personal regression
and averaged over fixed windows. When a window closes its mean ``rr_t2`` is
checked against two conditions:

1. abnormality: ``|rr_t2 - tau| > abnormal_band``
2. fluttering: ``|rr_t2 - rr_t1| > flutter_delta``, where ``rr_t1`` is the
   previous window's mean (the one-value feedback register)

``confirm_windows`` consecutive windows meeting both conditions raise one
:class:`AlertTrigger`, after which the detector sits in cooldown. It re-arms
only once the cooldown has expired *and* a clean window has been seen.

Windows are laid on a grid anchored at the first pulse-bearing sample and a
window is evaluated when the first sample at or beyond its end arrives.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Iterable

import numpy as np

from .errors import OutOfOrderSampleError
from .ingest import PulseSample
from .model import PersonalModel, predict_rr

__all__ = [
    "DetectorConfig",
    "DetectionState",
    "AlertTrigger",
    "NORMAL",
    "SUSPECT",
    "COOLDOWN",
    "REASON",
    "step",
    "run_stream",
]

NORMAL = "normal"
SUSPECT = "suspect"
COOLDOWN = "cooldown"

REASON = "AbnormalAndFluttering"


@dataclass(frozen=True)
class DetectorConfig:
    """Detector tunables. ``None`` bands are derived from the model's sigma_rr."""

    window: float = 5.0
    abnormal_band: float | None = None
    flutter_delta: float | None = None
    confirm_windows: int = 2
    cooldown: float = 300.0
    adl_gating: bool = False

    def __post_init__(self):
        if not self.window > 0:
            raise ValueError("window must be > 0")
        if self.abnormal_band is not None and not self.abnormal_band > 0:
            raise ValueError("abnormal_band must be > 0")
        if self.flutter_delta is not None and not self.flutter_delta > 0:
            raise ValueError("flutter_delta must be > 0")
        if self.confirm_windows < 1:
            raise ValueError("confirm_windows must be >= 1")
        if not self.cooldown >= 0:
            raise ValueError("cooldown must be >= 0")

    def band(self, model: PersonalModel) -> float:
        if self.abnormal_band is not None:
            return self.abnormal_band
        return max(2.0, 2.0 * model.sigma_rr)

    def flutter(self, model: PersonalModel) -> float:
        if self.flutter_delta is not None:
            return self.flutter_delta
        return max(1.0, model.sigma_rr)


@dataclass(frozen=True)
class AlertTrigger:
    t: float
    rr_t1: float
    rr_t2: float
    tau: float
    reason: str = REASON

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DetectionState:
    phase: str = NORMAL
    suspect_count: int = 0
    cooldown_until: float | None = None
    rr_prev: float | None = None
    acc_sum: float = 0.0
    acc_count: int = 0
    acc_pulse: float = 0.0
    window_start: float | None = None
    grid_origin: float | None = None
    last_t: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DetectionState":
        return cls(**d)

    def dumps(self) -> str:
        """Lossless JSON (shortest round-trip floats) for resuming a stream later."""
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    @classmethod
    def loads(cls, text: str) -> "DetectionState":
        return cls.from_dict(json.loads(text))


def _is_gated(model: PersonalModel, mean_pulse: float) -> bool:
    # suppress when the window sits nearest the highest-pulse (exercise-like) cluster
    if model.k < 2:
        return False
    pulses = np.array([c[1] for c in model.centers])
    nearest = int(np.argmin(np.abs(pulses - mean_pulse)))
    return nearest == int(np.argmax(pulses))


def _close_window(state, model, cfg, t_end):
    rr_t2 = state.acc_sum / state.acc_count
    band = cfg.band(model)
    flutter = cfg.flutter(model)
    abnormal = abs(rr_t2 - model.tau) > band
    fluttering = state.rr_prev is not None and abs(rr_t2 - state.rr_prev) > flutter
    hit = abnormal and fluttering
    if hit and cfg.adl_gating and _is_gated(model, state.acc_pulse / state.acc_count):
        hit = False

    trigger = None
    phase, count, until = state.phase, state.suspect_count, state.cooldown_until
    if phase == COOLDOWN:
        if t_end >= until and not hit:
            phase, count, until = NORMAL, 0, None
    elif hit:
        count += 1
        phase = SUSPECT
        if count >= cfg.confirm_windows:
            trigger = AlertTrigger(t=t_end, rr_t1=state.rr_prev, rr_t2=rr_t2, tau=model.tau)
            if not (abs(rr_t2 - model.tau) > band and abs(rr_t2 - state.rr_prev) > flutter):
                raise AssertionError(f"trigger violates its invariants: {trigger}")
            phase, count, until = COOLDOWN, 0, t_end + cfg.cooldown
    else:
        phase, count = NORMAL, 0

    state = replace(state, phase=phase, suspect_count=count, cooldown_until=until, rr_prev=rr_t2)
    return state, trigger


def step(
    state: DetectionState, model: PersonalModel, cfg: DetectorConfig, sample: PulseSample
) -> tuple[DetectionState, AlertTrigger | None]:
    """Advance the detector by one sample. Pure: ``state`` is not modified."""
    if state.last_t is not None and not sample.t > state.last_t:
        raise OutOfOrderSampleError(f"sample at t={sample.t} is not after t={state.last_t}")
    state = replace(state, last_t=sample.t)
    if sample.pulse is None:
        return state, None

    trigger = None
    if state.grid_origin is None:
        state = replace(state, grid_origin=sample.t, window_start=sample.t)
    elif sample.t >= state.window_start + cfg.window:
        t_end = state.window_start + cfg.window
        if state.acc_count:
            state, trigger = _close_window(state, model, cfg, t_end)
        n = math.floor((sample.t - state.grid_origin) / cfg.window)
        state = replace(
            state,
            window_start=state.grid_origin + n * cfg.window,
            acc_sum=0.0,
            acc_count=0,
            acc_pulse=0.0,
        )

    rr = float(predict_rr(model.regression, sample.pulse))
    state = replace(
        state,
        acc_sum=state.acc_sum + rr,
        acc_count=state.acc_count + 1,
        acc_pulse=state.acc_pulse + sample.pulse,
    )
    return state, trigger


def run_stream(
    samples: Iterable[PulseSample],
    model: PersonalModel,
    cfg: DetectorConfig | None = None,
    state: DetectionState | None = None,
) -> tuple[list[AlertTrigger], DetectionState]:
    cfg = cfg or DetectorConfig()
    state = state or DetectionState()
    alerts = []
    for s in samples:
        state, trigger = step(state, model, cfg, s)
        if trigger is not None:
            alerts.append(trigger)
    return alerts, state
