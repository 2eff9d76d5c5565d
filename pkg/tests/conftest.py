import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from peridyn_fd import BondModel, build_grid

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# filled by test_acceptance, printed once at the end of the session
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[1])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")


@pytest.fixture(scope="session")
def grid1d():
    return build_grid(1, 1.0, 0.05, 0.2)


@pytest.fixture(scope="session")
def model1d(grid1d):
    return BondModel(grid1d)


@pytest.fixture(scope="session")
def grid2d():
    return build_grid(2, 1.0, 0.025, 0.1)


@pytest.fixture(scope="session")
def model2d(grid2d):
    return BondModel(grid2d)


def random_field(grid, rng, scale=0.01):
    return scale * rng.standard_normal(grid.shape + (grid.d,))
