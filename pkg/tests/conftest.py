"""Acceptance bookkeeping: one PASS/FAIL line per criterion in the terminal summary."""

import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, part): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, part = marker.args
    _RESULTS.setdefault(number, {})[part] = report.passed


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        parts = _RESULTS[number]
        verdict = "PASS" if all(parts.values()) else "FAIL"
        detail = ", ".join(f"{p}: {'pass' if ok else 'fail'}" for p, ok in parts.items())
        terminalreporter.write_line(f"criterion {number:>2}: {verdict}  ({detail})")
