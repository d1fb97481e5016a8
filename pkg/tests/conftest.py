import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260514)


_CRITERIA_LINES = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid and report.capstdout:
        _CRITERIA_LINES.append(report.capstdout.strip())


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA_LINES:
            terminalreporter.write_line(line)
