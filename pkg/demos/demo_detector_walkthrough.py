"""
Watching the detector window by window
======================================

A synthetic day-in-the-life pulse trace gets one injected episode: a short
burst of tachycardia followed directly by bradycardia. The detector should
stay quiet through the ordinary activity changes and fire once.
"""

from pathlib import Path

from pulsewatch.detector import DetectionState, DetectorConfig, step
from pulsewatch.ingest import AdlProfile, PulseSample, synth_adl
from pulsewatch.persist import load_model

ROOT = Path(__file__).resolve().parents[1]
model = load_model(ROOT / "tests" / "data" / "episode_model.json").model

trace = synth_adl(
    [
        AdlProfile("rest", mean=75, sd=1.0, duration=120),
        AdlProfile("walk", mean=78, sd=1.0, duration=60),
        AdlProfile("rest", mean=75, sd=1.0, duration=60),
    ],
    seed=7,
)

###############################################################################
# Overwrite ten seconds in the middle with the episode.

def episode(s):
    if 150 <= s.t < 155:
        return PulseSample(t=s.t, pulse=110.0)
    if 155 <= s.t < 160:
        return PulseSample(t=s.t, pulse=45.0)
    return s


trace = [episode(s) for s in trace]

###############################################################################
# Step through the stream and print every window that changes the phase or
# raises an alert. ``step`` is pure, so the state can be inspected freely.

cfg = DetectorConfig()
print(f"band = {cfg.band(model):.2f}, flutter = {cfg.flutter(model):.2f}, tau = {model.tau:.3f}")
state = DetectionState()
for s in trace:
    before = state.phase
    state, trigger = step(state, model, cfg, s)
    if trigger is not None:
        print(f"t={trigger.t:6.1f}  ALERT  rr_t1={trigger.rr_t1:.2f} rr_t2={trigger.rr_t2:.2f}")
    elif state.phase != before:
        print(f"t={s.t:6.1f}  {before} -> {state.phase}  (rr_prev={state.rr_prev:.2f})")
print(f"final phase: {state.phase}")
