from __future__ import annotations

import warnings

import pytest
from hypothesis import HealthCheck, settings

from youngint.errors import YoungWarning

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(autouse=True)
def _quiet_heuristic_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", YoungWarning)
        yield


@pytest.fixture
def record_acceptance():
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
