import os

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_GATE_LINES: list[str] = []


@pytest.fixture
def gate():
    """Record one acceptance line, then assert it."""

    def check(cid: str, ok: bool, detail: str):
        _GATE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] criterion {cid}: {detail}")
        assert ok, f"criterion {cid}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter):
    if _GATE_LINES:
        terminalreporter.section("acceptance")
        for line in _GATE_LINES:
            terminalreporter.write_line(line)
