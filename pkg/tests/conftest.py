import numpy as np
import pytest

from rde.forcing import ForcingFunction, ForcingLaw, LinearCap, LogExp, Zero


@pytest.fixture(scope="session")
def resistance():
    return ForcingLaw.single(0.5, LogExp, LogExp, "resistance")


@pytest.fixture(scope="session")
def distance():
    return ForcingLaw.single(0.5, LogExp, Zero, "distance")


@pytest.fixture(scope="session")
def cooperative():
    return ForcingLaw.single(0.5, LinearCap, LinearCap, "cooperative")


@pytest.fixture(scope="session")
def zero_law():
    return ForcingLaw.single(0.5, Zero, Zero)


def two_exp_forcing():
    """f(u) = 2 e^-u sampled on knots: fails u + f(u) nondecreasing near 0."""
    u = np.linspace(0.0, 20.0, 401)
    return ForcingFunction.tabulated(list(zip(u, 2.0 * np.exp(-u))))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
