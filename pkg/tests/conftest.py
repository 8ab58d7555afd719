from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: dict[int, list[tuple[str, str, float]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion (or one part of it) checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    measured = dict(report.user_properties).get("measured")
    if measured:
        title = f"{title}: {measured}"
    _RESULTS.setdefault(number, []).append(("PASS" if report.passed else "FAIL", title, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        parts = _RESULTS[number]
        status = "PASS" if all(p[0] == "PASS" for p in parts) else "FAIL"
        secs = sum(p[2] for p in parts)
        if len(parts) == 1:
            detail = parts[0][1]
        else:
            detail = "; ".join(f"{title} [{st}]" for st, title, _ in parts)
        terminalreporter.write_line(f"{status} criterion {number:>2}: {detail} ({secs:.1f} s)")
