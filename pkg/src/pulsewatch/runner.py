"""End-to-end commands: train, simulate, report and NMEA log inspection.

Each function takes an :class:`~pulsewatch.config.AppConfig`, writes its files
under ``cfg.run_dir()`` (except ``train``, which honours ``cfg.model``) and
returns a plain dict summary that the CLI prints.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

from . import alerting, geoloc
from .alerting import SimulatedModem, compose_sms, dispatch
from .config import AppConfig, ConfigError
from .detector import run_stream
from .errors import BadChecksumError, MalformedFieldsError, NmeaError
from .ingest import parse_numerics_csv
from .model import (
    PREPROCESSING,
    fit_resting_rate,
    feature_matrix,
    kmeans,
    preprocess,
    train_personal_model,
    variability,
    zscore,
)
from .persist import ModelDocument, atomic_write, dumps, load_model, save_model, sha256_bytes

__all__ = [
    "REFERENCE_INTERCEPT",
    "REFERENCE_SLOPE",
    "REFERENCE_VARIABILITY",
    "train",
    "simulate",
    "report",
    "read_nmea_log",
    "fix_as_of",
]

# published coefficients and k-means variability for BIDMC record 20
REFERENCE_INTERCEPT = 41.1532
REFERENCE_SLOPE = -0.2886
REFERENCE_VARIABILITY = {3: 79.31, 5: 75.16}


def _require(path, what):
    if not path:
        raise ConfigError(f"no {what} path configured")
    return Path(path)


def _load_samples(path):
    raw = Path(path).read_bytes()
    return raw, parse_numerics_csv(raw, source=str(path))


def train(cfg: AppConfig) -> dict:
    dataset = _require(cfg.dataset, "dataset")
    raw, samples = _load_samples(dataset)
    models = {}
    for k in cfg.ks:
        models[k] = train_personal_model(
            samples,
            k=k,
            seed=cfg.seed,
            restarts=cfg.restarts,
            standardize=cfg.standardize,
            preprocessing=cfg.preprocessing,
        )
    primary = models[cfg.ks[0]]
    rows = preprocess(samples, cfg.preprocessing)
    provenance = {
        "dataset": dataset.name,
        "dataset_sha256": sha256_bytes(raw),
        "rows_total": len(samples),
        "rows_after_filter": len(rows),
        "rows_clustered": int(feature_matrix(rows).shape[0]),
        "preprocessing": cfg.preprocessing,
        "seed": cfg.seed,
        "restarts": cfg.restarts,
        "standardize": cfg.standardize,
        "variability_by_k": {str(k): m.variability_pct for k, m in models.items()},
    }
    doc = ModelDocument(model=primary, provenance=provenance)
    model_path = Path(cfg.model) if cfg.model else cfg.run_dir() / "model.json"
    save_model(model_path, doc)
    return {
        "model_path": str(model_path),
        "per_k": [
            {
                "k": k,
                "intercept": m.regression.intercept,
                "slope": m.regression.slope,
                "tau": m.tau,
                "sigma_rr": m.sigma_rr,
                "variability_pct": m.variability_pct,
            }
            for k, m in models.items()
        ],
    }


def read_nmea_log(path) -> list[dict]:
    """Classify every non-blank line of an NMEA log.

    Entries carry ``line`` (1-based), ``status`` (``parsed``, ``skipped``,
    ``BadChecksum`` or ``MalformedFields``) and either ``fix`` or ``error``.
    """
    entries = []
    for lineno, line in enumerate(Path(path).read_bytes().split(b"\n"), start=1):
        if not line.strip():
            continue
        try:
            result = geoloc.parse_nmea_sentence(line)
        except BadChecksumError as exc:
            entries.append({"line": lineno, "status": "BadChecksum", "error": str(exc)})
            continue
        except MalformedFieldsError as exc:
            entries.append({"line": lineno, "status": "MalformedFields", "error": str(exc)})
            continue
        except NmeaError as exc:  # pragma: no cover - every NmeaError is one of the above
            entries.append({"line": lineno, "status": "error", "error": str(exc)})
            continue
        if isinstance(result, geoloc.GeoFix):
            entries.append({"line": lineno, "status": "parsed", "fix": result})
        else:
            entries.append({"line": lineno, "status": "skipped", "type": result.talker_type})
    return entries


def fix_as_of(entries, t: float, epoch: dt.datetime | None):
    """Latest usable fix at stream time ``t``.

    Without an epoch the whole log counts as already received. With one, a
    fix is eligible once its UTC time of day is not after ``epoch + t``.
    """
    fixes = [e["fix"] for e in entries if e["status"] == "parsed"]
    if epoch is None:
        return geoloc.latest_fix(fixes)
    now = (epoch + dt.timedelta(seconds=t)).astimezone(dt.timezone.utc)
    tod = now.hour * 3600 + now.minute * 60 + now.second + now.microsecond / 1e6
    eligible = [f for f in fixes if (s := geoloc.utc_seconds(f.utc)) is not None and s <= tod]
    return geoloc.latest_fix(eligible)


def simulate(cfg: AppConfig) -> dict:
    if not cfg.contacts:
        raise ConfigError("simulate needs at least one contact")
    doc = load_model(_require(cfg.model, "model"))
    _, samples = _load_samples(_require(cfg.pulse, "pulse"))
    entries = read_nmea_log(cfg.nmea) if cfg.nmea else []
    epoch = cfg.epoch_datetime()

    alerts, _ = run_stream(samples, doc.model, cfg.detector_config())
    run_dir = cfg.run_dir()
    modem = SimulatedModem(cfg.modem_script)
    alert_rows = []
    for i, trig in enumerate(alerts):
        fix = fix_as_of(entries, trig.t, epoch)
        msg = compose_sms(trig, fix, cfg.device_id, epoch or alerting.EPOCH)
        records = dispatch(msg, cfg.contacts, modem, cfg.max_retries)
        deliveries = []
        for j, rec in enumerate(records):
            name = f"alert{i:02d}_contact{j:02d}.bin"
            atomic_write(run_dir / name, rec.transcript)
            deliveries.append(
                {"recipient": rec.recipient, "attempts": rec.attempts, "outcome": rec.outcome, "transcript": name}
            )
        alert_rows.append(
            {
                "t": trig.t,
                "time": msg.time_text,
                "rr_t1": trig.rr_t1,
                "rr_t2": trig.rr_t2,
                "tau": trig.tau,
                "reason": trig.reason,
                "lat": msg.lat,
                "lon": msg.lon,
                "fix_utc": msg.fix_utc,
                "sms": msg.body,
                "deliveries": deliveries,
            }
        )
    summary = {
        "samples": len(samples),
        "alert_count": len(alerts),
        "alerts": alert_rows,
        "nmea": {
            status: sum(1 for e in entries if e["status"] == status)
            for status in ("parsed", "skipped", "BadChecksum", "MalformedFields")
        },
    }
    atomic_write(run_dir / "report.json", dumps(summary))
    return summary


def _clustering_rows(samples, ks, seed, restarts):
    X = feature_matrix(preprocess(samples, "drop-missing"))
    rows = []
    for standardize in (False, True):
        data = zscore(X)[0] if standardize else X
        for k in ks:
            res = kmeans(data, k, seed=seed, restarts=restarts)
            pct = variability(res.within_ss, res.total_ss)
            ref = REFERENCE_VARIABILITY.get(k)
            rows.append(
                {
                    "k": k,
                    "standardized": standardize,
                    "variability_pct": pct,
                    "within_ss": res.within_ss,
                    "between_ss": res.between_ss,
                    "total_ss": res.total_ss,
                    "reference_pct": ref,
                    "abs_deviation": None if ref is None else abs(pct - ref),
                }
            )
    return rows


def report(cfg: AppConfig) -> dict:
    """Regression and clustering figures next to the published reference values."""
    dataset = _require(cfg.dataset, "dataset")
    raw, samples = _load_samples(dataset)
    ols = []
    for choice in PREPROCESSING:
        reg = fit_resting_rate(preprocess(samples, choice))
        ols.append(
            {
                "preprocessing": choice,
                "n_train": reg.n_train,
                "intercept": reg.intercept,
                "slope": reg.slope,
                "reference_intercept": REFERENCE_INTERCEPT,
                "reference_slope": REFERENCE_SLOPE,
                "abs_dev_intercept": abs(reg.intercept - REFERENCE_INTERCEPT),
                "abs_dev_slope": abs(reg.slope - REFERENCE_SLOPE),
            }
        )
    clusters = _clustering_rows(samples, (3, 5), cfg.seed, cfg.restarts)
    by_mode = {}
    for row in clusters:
        by_mode.setdefault(row["standardized"], {})[row["k"]] = row["variability_pct"]
    ordering = {
        ("standardized" if mode else "raw"): ("k5<k3" if v[5] < v[3] else "k5>=k3")
        for mode, v in by_mode.items()
    }
    result = {
        "dataset": dataset.name,
        "dataset_sha256": sha256_bytes(raw),
        "rows": len(samples),
        "seed": cfg.seed,
        "restarts": cfg.restarts,
        "ols": ols,
        "clustering": clusters,
        "reference_ordering": "k5<k3",
        "computed_ordering": ordering,
    }
    run_dir = cfg.run_dir()
    atomic_write(run_dir / "report.json", dumps(result))
    atomic_write(run_dir / "report.txt", format_report(result))
    return result


def _num(value, width, digits=4):
    return f"{value:>{width}.{digits}f}"


def format_report(result: dict) -> str:
    lines = [
        f"dataset {result['dataset']} ({result['rows']} rows, sha256 {result['dataset_sha256'][:12]})",
        "",
        "OLS resp ~ pulse",
        f"{'preprocessing':<14}{'n':>6}{'intercept':>12}{'slope':>10}{'ref_int':>10}{'ref_slope':>10}"
        f"{'|d_int|':>10}{'|d_slope|':>10}",
    ]
    for r in result["ols"]:
        lines.append(
            f"{r['preprocessing']:<14}{r['n_train']:>6}{_num(r['intercept'], 12)}{_num(r['slope'], 10)}"
            f"{_num(r['reference_intercept'], 10)}{_num(r['reference_slope'], 10)}"
            f"{_num(r['abs_dev_intercept'], 10)}{_num(r['abs_dev_slope'], 10)}"
        )
    lines += [
        "",
        f"k-means variability (restarts={result['restarts']}, seed={result['seed']})",
        f"{'k':>3}{'standardized':>14}{'variability':>13}{'reference':>11}{'|dev|':>9}",
    ]
    for r in result["clustering"]:
        ref = "-" if r["reference_pct"] is None else f"{r['reference_pct']:.2f}"
        dev = "-" if r["abs_deviation"] is None else f"{r['abs_deviation']:.2f}"
        lines.append(
            f"{r['k']:>3}{('yes' if r['standardized'] else 'no'):>14}{r['variability_pct']:>13.2f}{ref:>11}{dev:>9}"
        )
    lines += [
        "",
        f"reference ordering: {result['reference_ordering']}",
        "computed ordering: " + ", ".join(f"{m} {o}" for m, o in result["computed_ordering"].items()),
    ]
    return "\n".join(lines) + "\n"
