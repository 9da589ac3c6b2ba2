import numpy as np
import pytest

from qcdo.config import parse_config, reference_path
from qcdo.dist import REFERENCE_NIG, STANDARD_NORMAL, discretize
from qcdo.qsim import QuantumState


@pytest.fixture(scope="session")
def reference():
    return parse_config(reference_path())


@pytest.fixture(scope="session")
def reference_gaussian():
    return parse_config(reference_path("gaussian"))


@pytest.fixture(scope="session")
def gauss_grid():
    return discretize(STANDARD_NORMAL.pdf, 4, -3.0, 3.0)


@pytest.fixture(scope="session")
def nig_grid():
    return discretize(REFERENCE_NIG.pdf, 4, -3.0, 3.0)


def random_state(n, rng):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return QuantumState(v / np.linalg.norm(v), n)


# One line per acceptance criterion, collected by tests/test_acceptance.py and
# echoed in the terminal summary so it survives output capture.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
