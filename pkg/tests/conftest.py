"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import pytest

_criteria = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when not in ("setup", "call"):
        return
    number, title = marker.args
    if call.excinfo is not None:
        reason = call.excinfo.exconly().splitlines()[0][:160]
        status = "SKIP" if call.excinfo.errisinstance(pytest.skip.Exception) else "FAIL"
        _criteria[number] = (title, status, reason)
    elif call.when == "call" and number not in _criteria:
        _criteria[number] = (title, "PASS", "")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status, reason = _criteria[number]
        line = f"AC{number:<3d}{status}  {title}"
        if reason:
            line += f"  ({reason})"
        terminalreporter.write_line(line)
