"""Shared pytest plumbing.

Tests marked ``@pytest.mark.criterion(n, "text")`` report one summary line
each at the end of the run, so a plain ``pytest -v`` prints an explicit
pass/fail verdict per acceptance criterion even with output capture on.
"""

import pytest

_RESULTS: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(num, text): acceptance criterion with a summary verdict line",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    num, text = marker.args
    if report.when == "call":
        _RESULTS[num] = (text, report.passed)
    elif report.failed:  # setup/teardown error counts as a failure
        _RESULTS[num] = (text, False)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        text, ok = _RESULTS[num]
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d}: {verdict} - {text}")
