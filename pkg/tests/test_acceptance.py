"""Acceptance suite.

Run ``pytest tests/test_acceptance.py`` and read the "acceptance criteria"
section at the end of the output: one PASS/FAIL line per criterion, followed
by the measured figures each test recorded.

Criteria that need the BIDMC record-20 snapshot fail (they do not skip) when
the file is absent; see the README for where to put it.
"""

import csv
import datetime as dt
import json
import re
import time

import numpy as np
import pytest

from oracles import brute_force_within_ss
from pulsewatch import cli
from pulsewatch.alerting import (
    GSM7_ASCII,
    MAX_SMS_LEN,
    compose_sms,
    decode_at_frame,
    emit_at_commands,
)
from pulsewatch.detector import AlertTrigger, DetectionState, DetectorConfig, run_stream, step
from pulsewatch.errors import BadChecksumError, NmeaError
from pulsewatch.geoloc import NO_FIX, GeoFix, Quality, SkippedSentence, parse_nmea_sentence
from pulsewatch.ingest import PulseSample, read_numerics_csv
from pulsewatch.model import (
    PREPROCESSING,
    feature_matrix,
    fit_resting_rate,
    kmeans,
    preprocess,
    train_personal_model,
    variability,
    zscore,
)

REF_INTERCEPT, REF_SLOPE = 41.1532, -0.2886
REF_VARIABILITY = {3: 79.31, 5: 75.16}

A1 = pytest.mark.criterion("A1", "regression reproduction on BIDMC record 20")
A2 = pytest.mark.criterion("A2", "clustering reproduction and SS invariants")
A3 = pytest.mark.criterion("A3", "small-instance k-means optimality")
A4 = pytest.mark.criterion("A4", "detection scenario suite")
A5 = pytest.mark.criterion("A5", "NMEA corpus, corruption property and fuzz")
A6 = pytest.mark.criterion("A6", "AT framing golden files and round-trip")
A7 = pytest.mark.criterion("A7", "end-to-end simulate")


@pytest.fixture(scope="module")
def bidmc_samples(bidmc_path):
    return read_numerics_csv(bidmc_path)


def _pairs(rows):
    xy = np.array([(s.pulse, s.resp) for s in rows if s.pulse is not None and s.resp is not None], float)
    return xy[:, 0], xy[:, 1]


# -- A1 ---------------------------------------------------------------------


@A1
def test_a1_normal_equations_and_runtime(bidmc_path, note):
    start = time.perf_counter()
    samples = read_numerics_csv(bidmc_path)
    fits = {choice: fit_resting_rate(preprocess(samples, choice)) for choice in PREPROCESSING}
    elapsed = time.perf_counter() - start
    note(f"parse + {len(fits)} fits: {elapsed * 1000:.1f} ms over {len(samples)} rows")
    for choice, reg in fits.items():
        x, y = _pairs(preprocess(samples, choice))
        resid = y - (reg.intercept + reg.slope * x)
        scale = max(float(np.abs(y).sum()), 1.0)
        assert abs(resid.sum()) <= 1e-9 * scale
        assert abs((resid * x).sum()) <= 1e-9 * scale * float(np.abs(x).max())
        slope, intercept = np.polyfit(x, y, 1)
        assert reg.intercept == pytest.approx(intercept, rel=1e-9, abs=1e-9)
        assert reg.slope == pytest.approx(slope, rel=1e-9, abs=1e-12)
    assert elapsed < 1.0


@A1
def test_a1_coefficients_match_reference(bidmc_samples, note):
    best = None
    for choice in PREPROCESSING:
        reg = fit_resting_rate(preprocess(bidmc_samples, choice))
        d_int, d_slope = abs(reg.intercept - REF_INTERCEPT), abs(reg.slope - REF_SLOPE)
        note(
            f"{choice:<13} n={reg.n_train:<5} intercept={reg.intercept:.4f} (|d|={d_int:.4f}) "
            f"slope={reg.slope:.4f} (|d|={d_slope:.4f})"
        )
        if best is None or max(d_int, d_slope) < best[0]:
            best = (max(d_int, d_slope), choice)
    note(f"nearest: {best[1]} with max deviation {best[0]:.4f} (tolerance 0.05)")
    assert best[0] <= 0.05


# -- A2 ---------------------------------------------------------------------


@A2
def test_a2_variability_on_bidmc(bidmc_samples, note):
    X = feature_matrix(preprocess(bidmc_samples, "drop-missing"))
    start = time.perf_counter()
    hits = []
    for standardize in (False, True):
        data = zscore(X)[0] if standardize else X
        pct = {}
        for k in (1, 3, 5):
            res = kmeans(data, k, seed=0, restarts=25)
            assert abs(res.total_ss - (res.within_ss + res.between_ss)) <= 1e-6 * res.total_ss
            pct[k] = variability(res.within_ss, res.total_ss)
            assert 0.0 <= pct[k] <= 100.0
        assert pct[1] == 0.0
        mode = "standardized" if standardize else "raw"
        within = all(abs(pct[k] - REF_VARIABILITY[k]) <= 5.0 for k in (3, 5))
        hits.append(within)
        note(
            f"{mode:<12} k=3 {pct[3]:.2f}% (ref 79.31)  k=5 {pct[5]:.2f}% (ref 75.16)  "
            f"target {'met' if within else 'missed'}; ordering {'k5<k3' if pct[5] < pct[3] else 'k5>=k3'}"
        )
    elapsed = time.perf_counter() - start
    note(f"reproduction target met in at least one mode: {any(hits)} (reported, not asserted)")
    note(f"6 clusterings x 25 restarts on {len(X)} rows: {elapsed:.2f} s")
    assert elapsed < 10.0


@A2
def test_a2_invariants_on_fixture_data(synthetic_samples):
    # the hard assertions also hold on data that is always present
    X = feature_matrix(preprocess(synthetic_samples, "drop-missing"))
    for data in (X, zscore(X)[0]):
        for k in (1, 3, 5):
            res = kmeans(data, k, seed=0, restarts=25)
            assert abs(res.total_ss - (res.within_ss + res.between_ss)) <= 1e-6 * res.total_ss
            pct = variability(res.within_ss, res.total_ss)
            assert 0.0 <= pct <= 100.0
            if k == 1:
                assert pct == 0.0


# -- A3 ---------------------------------------------------------------------


@A3
def test_a3_brute_force_optimum(data_dir, note):
    instances = json.loads((data_dir / "kmeans_instances.json").read_text())
    misses = []
    for i, inst in enumerate(instances):
        points, k = inst["points"], inst["k"]
        assert len(points) <= 10 and k <= 3
        res = kmeans(points, k, seed=0)
        best = brute_force_within_ss(points, k)
        if res.within_ss != pytest.approx(best, rel=1e-12, abs=1e-12):
            misses.append((i, res.within_ss, best))
    note(f"{len(instances)} instances, {len(misses)} above the brute-force optimum")
    assert not misses, misses[:5]


# -- A4 ---------------------------------------------------------------------


def _stream(pulses, t0=0.0, dt_=1.0):
    return [PulseSample(t=t0 + i * dt_, pulse=float(p)) for i, p in enumerate(pulses)]


def _timed_run(samples, model, cfg=None):
    start = time.perf_counter()
    alerts, state = run_stream(samples, model, cfg)
    return alerts, state, time.perf_counter() - start


@A4
def test_a4a_bidmc_normal_replay(bidmc_samples, note):
    model = train_personal_model(bidmc_samples, k=3)
    alerts, _, elapsed = _timed_run(bidmc_samples, model, DetectorConfig())
    note(f"(a) BIDMC replay: {len(alerts)} alerts over {len(bidmc_samples)} samples in {elapsed * 1000:.1f} ms")
    assert alerts == []
    assert elapsed < 1.0


@A4
def test_a4b_injected_episode(data_dir, episode_model, note):
    samples = read_numerics_csv(data_dir / "episode_stream.csv")
    alerts, _, elapsed = _timed_run(samples, episode_model, DetectorConfig())
    note(f"(b) episode fixture: alerts at t={[a.t for a in alerts]} (expected [70])")
    assert len(alerts) == 1
    trig = alerts[0]
    # window [60,65) at pulse 110, window [65,70) at pulse 45; the second closes at t=70
    assert trig.t == 70
    assert trig.rr_t1 == pytest.approx(REF_INTERCEPT + REF_SLOPE * 110)
    assert trig.rr_t2 == pytest.approx(REF_INTERCEPT + REF_SLOPE * 45)
    assert elapsed < 1.0


@A4
def test_a4c_single_condition_streams(episode_model, note):
    cfg = DetectorConfig()
    band, flutter = cfg.band(episode_model), cfg.flutter(episode_model)

    def rr(p):
        return REF_INTERCEPT + REF_SLOPE * p

    # condition 1 only: rr sits far outside the band but never moves
    cond1 = _stream([110] * 600)
    assert abs(rr(110) - episode_model.tau) > band
    # condition 2 only: rr jumps by more than the flutter delta every window, staying inside the band
    cond2 = _stream([72.5 if (i // 5) % 2 else 77.5 for i in range(600)])
    assert abs(rr(72.5) - rr(77.5)) > flutter
    assert max(abs(rr(72.5) - episode_model.tau), abs(rr(77.5) - episode_model.tau)) < band

    for name, samples in (("condition-1-only", cond1), ("condition-2-only", cond2)):
        alerts, _, elapsed = _timed_run(samples, episode_model, cfg)
        note(f"(c) {name}: {len(alerts)} alerts in {elapsed * 1000:.1f} ms")
        assert alerts == []
        assert elapsed < 1.0


def _incremental(samples, model, cfg, chunk):
    """Feed ``chunk`` samples at a time, persisting state through JSON between chunks."""
    state_doc = DetectionState().dumps()
    alerts = []
    for i in range(0, len(samples), chunk):
        state = DetectionState.loads(state_doc)
        for s in samples[i : i + chunk]:
            state, trig = step(state, model, cfg, s)
            if trig is not None:
                alerts.append(trig)
        state_doc = state.dumps()
    return json.dumps([a.to_dict() for a in alerts]) + state_doc


@A4
def test_a4d_incremental_equals_single_pass(data_dir, episode_model, note):
    episode = read_numerics_csv(data_dir / "episode_stream.csv")
    rng = np.random.default_rng(4)
    jittery = [
        PulseSample(t=float(t), pulse=None if rng.random() < 0.05 else float(rng.choice([45, 75, 75, 110])))
        for t in np.cumsum(rng.uniform(0.2, 2.0, size=1500))
    ]
    scenarios = [
        ("episode", episode, DetectorConfig()),
        ("jittery", jittery, DetectorConfig(cooldown=20)),
        ("jittery-gated", jittery, DetectorConfig(cooldown=20, adl_gating=True, window=3.5)),
    ]
    for name, samples, cfg in scenarios:
        start = time.perf_counter()
        alerts, state = run_stream(samples, episode_model, cfg)
        single = json.dumps([a.to_dict() for a in alerts]) + state.dumps()
        elapsed = time.perf_counter() - start
        for chunk in (1, 7, 64):
            assert _incremental(samples, episode_model, cfg, chunk) == single
        note(f"(d) {name}: {len(alerts)} alerts, byte-identical for chunks 1/7/64, single pass {elapsed * 1000:.1f} ms")
        assert elapsed < 1.0


# -- A5 ---------------------------------------------------------------------


def _corpus(data_dir):
    with open(data_dir / "nmea_corpus.tsv", newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter="\t") if r and not r[0].startswith("#")]
    return [(status, float(lat) if lat else None, float(lon) if lon else None, line) for status, lat, lon, line in rows]


def _classify(line):
    try:
        result = parse_nmea_sentence(line)
    except NmeaError as exc:
        return type(exc).__name__.replace("Error", ""), None
    if isinstance(result, SkippedSentence):
        return "skipped", result
    return ("parsed" if result.valid else "nofix"), result


@A5
def test_a5_corpus(data_dir, note):
    corpus = _corpus(data_dir)
    assert len(corpus) >= 20
    for status, lat, lon, line in corpus:
        got, result = _classify(line)
        assert got == status, line
        if lat is not None:
            assert result.lat == pytest.approx(lat, abs=1e-6)
            assert result.lon == pytest.approx(lon, abs=1e-6)
    counts = {s: sum(1 for c in corpus if c[0] == s) for s in dict.fromkeys(c[0] for c in corpus)}
    note(f"corpus of {len(corpus)} sentences classified correctly: {counts}")


@A5
def test_a5_reference_gga():
    fix = parse_nmea_sentence("$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*47")
    assert isinstance(fix, GeoFix) and fix.quality is Quality.GPS
    assert abs(fix.lat - 48.117300) <= 1e-6
    assert abs(fix.lon - 11.516667) <= 1e-6


@A5
def test_a5_single_byte_corruption(data_dir, note):
    valid = [line for status, _, _, line in _corpus(data_dir) if status in ("parsed", "nofix", "skipped") and "*" in line]
    checked = 0
    for line in valid:
        raw = line.encode()
        star = raw.rindex(b"*")
        for pos in range(1, star):
            for value in range(256):
                if value == raw[pos]:
                    continue
                bad = raw[:pos] + bytes([value]) + raw[pos + 1 :]
                with pytest.raises(BadChecksumError):
                    parse_nmea_sentence(bad)
                checked += 1
    note(f"{checked} corruptions of {len(valid)} valid sentences, all BadChecksum")


def _fuzz_lines(rng, seeds, n):
    alphabet = np.frombuffer(b"$*,.0123456789ABCDEFGHNSEWMVPRTZLX-\r\n ", dtype=np.uint8)
    for i in range(n):
        kind = i % 4
        if kind == 0:  # arbitrary bytes
            yield rng.integers(0, 256, size=int(rng.integers(0, 100)), dtype=np.uint8).tobytes()
        elif kind == 1:  # NMEA-flavoured noise
            yield b"$" + rng.choice(alphabet, size=int(rng.integers(0, 90))).tobytes()
        elif kind == 2:  # mutated real sentence
            raw = bytearray(seeds[int(rng.integers(len(seeds)))])
            for _ in range(int(rng.integers(1, 4))):
                op, pos = int(rng.integers(3)), int(rng.integers(len(raw) + 1))
                if op == 0 and pos < len(raw):
                    del raw[pos]
                elif op == 1:
                    raw.insert(pos, int(rng.integers(256)))
                elif pos < len(raw):
                    raw[pos] = int(rng.integers(256))
            yield bytes(raw)
        else:  # garbled fields behind a correct checksum
            fields = seeds[int(rng.integers(len(seeds)))].split(b"*")[0][1:].split(b",")
            j = int(rng.integers(len(fields)))
            fields[j] = rng.choice(alphabet[2:-3], size=int(rng.integers(0, 12))).tobytes()
            body = b",".join(fields[: int(rng.integers(1, len(fields) + 1))])
            cs = 0
            for b in body:
                cs ^= b
            yield b"$" + body + b"*%02X" % cs


@A5
def test_a5_fuzz(data_dir, note):
    seeds = [line.encode() for status, _, _, line in _corpus(data_dir) if line.startswith("$")]
    rng = np.random.default_rng(5)
    outcomes = {}
    start = time.perf_counter()
    for line in _fuzz_lines(rng, seeds, 100_000):
        try:
            result = parse_nmea_sentence(line)
            key = type(result).__name__
        except NmeaError as exc:
            key = type(exc).__name__
        outcomes[key] = outcomes.get(key, 0) + 1
    elapsed = time.perf_counter() - start
    assert sum(outcomes.values()) == 100_000
    note(f"fuzz 100000 lines in {elapsed:.1f} s, no crash: {dict(sorted(outcomes.items()))}")


# -- A6 ---------------------------------------------------------------------

GOLDEN = [
    (
        "alert1.bin",
        AlertTrigger(t=70.0, rr_t1=9.4072, rr_t2=28.1662, tau=19.5082),
        GeoFix(48.1173, 11.516666666666667, "123519", Quality.GPS, "GGA"),
        "BAND-0001",
        dt.datetime(1970, 1, 1, tzinfo=dt.timezone.utc),
        "+911234567890",
    ),
    (
        "alert2.bin",
        AlertTrigger(t=70.0, rr_t1=9.4072, rr_t2=28.1662, tau=19.5082),
        NO_FIX,
        "wrist-7",
        dt.datetime(2026, 3, 15, 10, 15, 30, tzinfo=dt.timezone.utc),
        "+14155550123",
    ),
    (
        "alert3.bin",
        AlertTrigger(t=86399.0, rr_t1=30.0, rr_t2=5.0, tau=19.5),
        GeoFix(-33.8688, -151.2093, "235959", Quality.DGPS, "RMC"),
        "ABCDEFGHIJKLMNOPQRST",
        dt.datetime(2024, 2, 29, tzinfo=dt.timezone.utc),
        "+447700900123",
    ),
]


@A6
@pytest.mark.parametrize("name,trigger,fix,device_id,epoch,recipient", GOLDEN, ids=[g[0] for g in GOLDEN])
def test_a6_golden(data_dir, name, trigger, fix, device_id, epoch, recipient):
    msg = compose_sms(trigger, fix, device_id, epoch)
    assert emit_at_commands(msg, recipient) == (data_dir / "golden" / name).read_bytes()


@A6
def test_a6_round_trip(note):
    rng = np.random.default_rng(6)
    chars = np.array(sorted(GSM7_ASCII))
    for _ in range(1000):
        body = "".join(rng.choice(chars, size=int(rng.integers(1, MAX_SMS_LEN + 1))))
        recipient = "+" + "".join(rng.choice(list("0123456789"), size=int(rng.integers(8, 16))))
        assert decode_at_frame(emit_at_commands(body, recipient)) == (recipient, body)
    note(f"1000 random bodies over a {len(chars)}-character alphabet round-tripped")


# -- A7 ---------------------------------------------------------------------


@A7
def test_a7_end_to_end(data_dir, tmp_path, note, capsys):
    code = cli.main(
        [
            "simulate",
            "--model", str(data_dir / "episode_model.json"),
            "--pulse", str(data_dir / "episode_stream.csv"),
            "--nmea", str(data_dir / "nmea_valid.log"),
            "--contact", "+911234567890",
            "--out-dir", str(tmp_path),
            "--label", "a7",
        ]
    )  # fmt: skip
    assert code == 0, capsys.readouterr().err
    run = tmp_path / "a7"
    transcripts = sorted(run.glob("*.bin"))
    assert len(transcripts) == 1
    raw = transcripts[0].read_bytes()
    body = raw[raw.rindex(b"\r\n> ") + 4 : raw.rindex(b"\x1a")].decode("ascii")
    m = re.search(r"\?q=(-?\d+\.\d+),(-?\d+\.\d+)", body)
    assert m is not None, body
    lat, lon = float(m.group(1)), float(m.group(2))
    # last valid fix in the log: 1249.380 N, 08002.670 E
    assert abs(lat - (12 + 49.380 / 60)) <= 1e-4
    assert abs(lon - (80 + 2.670 / 60)) <= 1e-4
    assert len(body) <= MAX_SMS_LEN
    report = json.loads((run / "report.json").read_text())
    assert report["alert_count"] == 1
    assert report["alerts"][0]["deliveries"][0]["outcome"] == "Delivered"
    note(f"{len(body)}-char body: {body}")
