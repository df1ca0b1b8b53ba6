"""Shared pytest hooks: echo recorded acceptance lines after the run."""

import pytest

_lines: list[str] = []


@pytest.fixture
def criterion_log():
    """Recorder for per-criterion pass/fail lines shown in the final summary."""
    return _lines.append


def pytest_terminal_summary(terminalreporter):
    if _lines:
        terminalreporter.section("acceptance criteria")
        for line in _lines:
            terminalreporter.write_line(line)
