from __future__ import annotations

import pytest

from oseledets_lab import Observable, cat_suspension

ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def cat():
    return cat_suspension()


@pytest.fixture
def half_cos():
    return Observable.cosine(0.5)


@pytest.fixture
def acceptance_line():
    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
