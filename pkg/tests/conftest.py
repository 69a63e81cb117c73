import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gphier.grid import make_grid

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid8():
    return make_grid(1, 8)


def random_values(rng, grid, k):
    shape = (grid.N,) * (2 * k * grid.n)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
