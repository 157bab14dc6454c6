import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from proxrate import CompositeProblem, L1Norm, Quadratic, SquaredDistance, ZeroFunction
from proxrate.instances import gen_random_lasso

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda t: t[0]):
            terminalreporter.write_line(line[1])


@pytest.fixture(scope="session")
def canonical():
    from proxrate import acceptance
    return acceptance.instance(0)


@pytest.fixture(scope="session")
def small_lasso():
    return gen_random_lasso(20, 30, 3, 0.01, 0.1, seed=3)


@pytest.fixture
def lasso_1d():
    """f = (x - 1)^2 / 2, g = 0.3 |x|; minimizer 0.7."""
    return CompositeProblem(SquaredDistance([1.0]), L1Norm(0.3), 1)


@pytest.fixture
def half_norm_sq():
    return CompositeProblem(Quadratic(np.eye(2), np.zeros(2)), ZeroFunction(), 2)
