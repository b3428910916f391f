import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def record_acceptance(name: str):
    """Mark an acceptance criterion as exercised; outcome is filled in from
    the test report so the summary shows one PASS/FAIL line per criterion."""
    _ACCEPTANCE_RESULTS.append((name, "PENDING"))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call" or "test_acceptance" not in item.nodeid:
        return
    for i, (name, status) in enumerate(_ACCEPTANCE_RESULTS):
        if status == "PENDING":
            _ACCEPTANCE_RESULTS[i] = (name, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status:4s}  {name}")
