from datetime import datetime, timedelta
from pathlib import Path

import pytest

from failpredict.engine import Engine, EnginePolicy
from failpredict.graph import build_dag, build_hop_matrix
from failpredict.model import load_model_file
from failpredict.parser import EventRecord

DATA = Path(__file__).parent / "data"
T0 = datetime(2021, 1, 1, 0, 0, 0)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def paper_model():
    return load_model_file(DATA / "paper.cfg")


@pytest.fixture(scope="session")
def paper_dag(paper_model):
    return build_dag(paper_model)


@pytest.fixture(scope="session")
def paper_hops(paper_model):
    return build_hop_matrix(paper_model)


@pytest.fixture
def make_engine(paper_model, paper_dag, paper_hops):
    def make(**policy):
        return Engine(paper_model, paper_dag, paper_hops, EnginePolicy(**policy))
    return make


def feed(engine, names, start=T0, step=timedelta(minutes=1)):
    """Ingest events by name; returns the per-event list of report lists."""
    out = []
    for k, name in enumerate(names):
        rec = EventRecord(engine.matrix.event(name), start + k * step, k + 1)
        out.append(engine.ingest(rec))
    return out


def paper_log(names, start=T0, step=timedelta(minutes=1), noise=False):
    lines = []
    for k, name in enumerate(names):
        ts = (start + k * step).isoformat()
        if noise:
            lines.append(f"{ts} heartbeat ok")
        lines.append(f"{ts} alarm {name} raised")
    return "".join(line + "\n" for line in lines)


_ACCEPTANCE: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    _ACCEPTANCE[number] = ("PASS" if call.excinfo is None else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}")
