import warnings

import pytest

from pimsim.archconfig import default_config
from pimsim.mapping import BudgetWarning

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture(autouse=True)
def _quiet_budget():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BudgetWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: tuple(int(v) for v in k.split("."))):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
