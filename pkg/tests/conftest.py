import math

import pytest

from drift_lab.model import ModelParams

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE_RESULTS = {}


@pytest.fixture
def p0():
    """gamma1 = gamma2 = lambda = omega1 = 1 on the shifted resonance."""
    return ModelParams(1.0, 1.0, 1.0, 1.0, 1e-3).at_resonance()


@pytest.fixture
def record_criterion():
    def record(cid, title, passed, detail):
        ACCEPTANCE_RESULTS[cid] = (title, bool(passed), detail)
        print(f"[{'PASS' if passed else 'FAIL'}] criterion {cid}: {title} -- {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[cid]
        terminalreporter.write_line(
            f"[{'PASS' if passed else 'FAIL'}] {cid}. {title}: {detail}")


TWO_PI = 2.0 * math.pi
