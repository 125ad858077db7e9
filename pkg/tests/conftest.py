import numpy as np
import pytest

from oscidamp.control import LqrWeights, lqr
from oscidamp.model import assemble_state_space, two_area_system

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def two_area():
    return two_area_system(eps=0.05)


@pytest.fixture(scope="session")
def two_area_ss(two_area):
    return assemble_state_space(two_area)


@pytest.fixture(scope="session")
def two_area_lqr(two_area_ss):
    k, p, _ = lqr(two_area_ss, LqrWeights.default(2))
    return k, p


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def record():
    """Log one summary line per acceptance criterion, then return the verdict."""
    def _record(number, title, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} ({detail})")
        return passed
    return _record
