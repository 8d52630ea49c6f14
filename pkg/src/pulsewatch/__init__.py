"""Personalized pulse-based emergency detection with GPS-tagged SMS alerts."""

from .alerting import AlertMessage, DeliveryRecord, SimulatedModem, compose_sms, dispatch, emit_at_commands
from .detector import AlertTrigger, DetectionState, DetectorConfig, run_stream, step
from .geoloc import NO_FIX, GeoFix, parse_nmea_sentence
from .ingest import AdlProfile, PulseSample, parse_numerics_csv, replay_stream, synth_adl
from .model import (
    PersonalModel,
    RegressionModel,
    compute_tau,
    fit_resting_rate,
    kmeans,
    predict_rr,
    train_personal_model,
    variability,
)

__version__ = "0.1.0"
