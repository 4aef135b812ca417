import os

import pytest

from invgrid import CASES, build_wscc9

# (criterion number) -> (passed, detail); filled by the acceptance tests
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def case2_light():
    return build_wscc9(0.4, CASES[2])


@pytest.fixture(scope="session")
def case1_light():
    return build_wscc9(0.4, CASES[1])


@pytest.fixture
def acceptance():
    def record(number: int, passed: bool, detail: str = ""):
        ACCEPTANCE[number] = (bool(passed), detail)
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")


def worker_count() -> int:
    return max(1, min(8, os.cpu_count() or 1))
