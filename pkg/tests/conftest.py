import numpy as np
import pytest

from ustatcpd.simulation import Covariance


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def ar1_draws(rng, n, p, rho=0.5):
    return Covariance("ar1", rho).draw(rng, n, p)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
