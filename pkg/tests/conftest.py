from pathlib import Path

import pytest

from pulsewatch.datasets import find_bidmc
from pulsewatch.ingest import read_numerics_csv
from pulsewatch.persist import load_model

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def synthetic_samples():
    return read_numerics_csv(DATA / "synthetic_numerics.csv")


@pytest.fixture(scope="session")
def episode_model():
    return load_model(DATA / "episode_model.json").model


@pytest.fixture(scope="session")
def bidmc_path():
    """Vendored BIDMC record 20, or a hard failure explaining how to vendor it."""
    path = find_bidmc([DATA])
    if path is None:
        pytest.fail(
            "BIDMC snapshot missing: place bidmc_20_Numerics.csv in tests/data/ "
            "or point $PULSEWATCH_BIDMC_CSV at it (see README)"
        )
    return path


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion at the end of the run

_CRITERIA: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, title): acceptance criterion covered by this test")


@pytest.fixture
def note(request):
    """Attach a line of measured detail to the criterion summary."""

    def add(text):
        request.node.user_properties.append(("note", str(text)))

    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    cid, title = marker.args
    entry = _CRITERIA.setdefault(cid, {"title": title, "parts": {}, "notes": []})
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        entry["parts"][item.name] = "PASS" if rep.passed else "FAIL"
    if rep.when == "teardown":
        entry["notes"].extend(v for k, v in item.user_properties if k == "note")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_CRITERIA):
        entry = _CRITERIA[cid]
        parts = entry["parts"]
        ok = bool(parts) and all(v == "PASS" for v in parts.values())
        failed = [name for name, v in parts.items() if v != "PASS"]
        suffix = "" if ok else f"  (failing: {', '.join(failed)})"
        tr.write_line(f"{cid} {'PASS' if ok else 'FAIL'}  {entry['title']}{suffix}")
        for text in entry["notes"]:
            tr.write_line(f"     {text}")
