from __future__ import annotations

import pytest
from hypothesis import settings

settings.register_profile("homlab", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("homlab")

_ACCEPTANCE_LINES: list = []


@pytest.fixture
def verdict():
    """``verdict(label, ok, detail)`` prints and records one PASS/FAIL line, then asserts ``ok``."""

    def report(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
