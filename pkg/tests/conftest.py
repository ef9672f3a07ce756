import socket
import time
from pathlib import Path

import pytest

from plotnode.llm.gateway import Gateway, ScriptedBackend

FIXTURES = Path(__file__).parent / "fixtures"
DATA = Path(__file__).parent / "data"
RUN1 = FIXTURES / "run1.jsonl"
USER_INPUT = "Tell the story of a young man returning from a terrible war."


def scripted(entries, cycle=False) -> Gateway:
    return Gateway(ScriptedBackend(entries, cycle=cycle))


@pytest.fixture
def run1_gateway() -> Gateway:
    return Gateway(ScriptedBackend.from_replay(RUN1))


# --- offline guard and acceptance summary ---------------------------------

ACCEPTANCE: list[tuple[str, bool, str]] = []
SUITE_LIMIT_S = 300.0
_clock = {}


def _no_network(*args, **kwargs):
    raise RuntimeError("network access is disabled during tests")


@pytest.fixture(autouse=True, scope="session")
def offline():
    original = socket.socket.connect
    socket.socket.connect = _no_network
    yield
    socket.socket.connect = original


def pytest_sessionstart(session):
    _clock["start"] = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    elapsed = time.perf_counter() - _clock.get("start", time.perf_counter())
    failed = len(terminalreporter.stats.get("failed", []))
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
    suite_ok = elapsed < SUITE_LIMIT_S and failed == 0
    terminalreporter.write_line(
        f"{'PASS' if suite_ok else 'FAIL'}  offline test suite  "
        f"{elapsed:.1f}s (limit {SUITE_LIMIT_S:.0f}s), {failed} failed"
    )
