"""Command-line entry point: ``pulsewatch {train,simulate,report,parse-nmea}``."""

from __future__ import annotations

import argparse
import sys

from . import geoloc, runner
from .config import CONFIG_ENV, load_config
from .errors import PulseWatchError


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV})")
    p.add_argument("--out-dir", dest="out_dir", help="parent directory for run outputs")
    p.add_argument("--label", help="run directory name under --out-dir")


def _clustering(p):
    p.add_argument("--k", dest="ks", type=int, action="append", help="cluster count (repeatable)")
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)


def _detector(p):
    p.add_argument("--window", type=float)
    p.add_argument("--abnormal-band", dest="abnormal_band", type=float)
    p.add_argument("--flutter-delta", dest="flutter_delta", type=float)
    p.add_argument("--confirm-windows", dest="confirm_windows", type=int)
    p.add_argument("--cooldown", type=float)
    p.add_argument("--adl-gating", dest="adl_gating", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulsewatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a personal model from a numerics CSV")
    _common(p)
    _clustering(p)
    p.add_argument("--dataset")
    p.add_argument("--model", help="output model file (default: <out-dir>/<label>/model.json)")
    p.add_argument("--standardize", action="store_true", default=None)
    p.add_argument("--preprocessing", choices=("none", "drop-missing", "drop-zeros"))

    p = sub.add_parser("simulate", help="run the detector over a pulse stream and dispatch alerts")
    _common(p)
    _detector(p)
    p.add_argument("--model")
    p.add_argument("--pulse", help="numerics CSV to replay")
    p.add_argument("--nmea", help="NMEA 0183 log")
    p.add_argument("--contact", dest="contacts", action="append", help="E.164 number (repeatable)")
    p.add_argument("--device-id", dest="device_id")
    p.add_argument("--epoch", help="ISO-8601 wall-clock time of stream t=0")
    p.add_argument("--max-retries", dest="max_retries", type=int)

    p = sub.add_parser("report", help="regression/clustering figures beside reference values")
    _common(p)
    p.add_argument("--dataset")
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)

    p = sub.add_parser("parse-nmea", help="classify every sentence of an NMEA log")
    p.add_argument("path")
    return parser


def _overrides(args) -> dict:
    skip = {"command", "config", "path"}
    out = {k: v for k, v in vars(args).items() if k not in skip and v is not None}
    for key in ("ks", "contacts"):
        if key in out:
            out[key] = tuple(out[key])
    return out


def _cmd_parse_nmea(path) -> int:
    entries = runner.read_nmea_log(path)
    for e in entries:
        if e["status"] == "parsed":
            fix = e["fix"]
            where = "-" if fix.lat is None else f"{fix.lat:.6f},{fix.lon:.6f}"
            detail = f"{fix.source} {fix.quality.value} {where} utc={fix.utc}"
        elif e["status"] == "skipped":
            detail = e["type"] or "not a sentence"
        else:
            detail = e["error"]
        print(f"{path}:{e['line']}\t{e['status']}\t{detail}")
    latest = geoloc.latest_fix(e["fix"] for e in entries if e["status"] == "parsed")
    print("latest fix: " + ("none" if not latest else f"{latest.lat:.6f},{latest.lon:.6f} utc={latest.utc}"))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "parse-nmea":
            return _cmd_parse_nmea(args.path)
        cfg = load_config(args.config).merged(**_overrides(args))
        if args.command == "train":
            out = runner.train(cfg)
            for row in out["per_k"]:
                print(
                    f"k={row['k']} intercept={row['intercept']:.4f} slope={row['slope']:.4f} "
                    f"tau={row['tau']:.4f} sigma_rr={row['sigma_rr']:.4f} "
                    f"variability={row['variability_pct']:.2f}%"
                )
            print(f"model written to {out['model_path']}")
        elif args.command == "simulate":
            out = runner.simulate(cfg)
            print(f"{out['alert_count']} alert(s) over {out['samples']} samples")
            for a in out["alerts"]:
                outcomes = ", ".join(f"{d['recipient']}:{d['outcome']}" for d in a["deliveries"])
                print(f"t={a['t']:g} {a['sms']} [{outcomes}]")
            print(f"report written to {cfg.run_dir() / 'report.json'}")
        elif args.command == "report":
            out = runner.report(cfg)
            print(runner.format_report(out), end="")
    except (PulseWatchError, OSError) as exc:
        print(f"pulsewatch {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
