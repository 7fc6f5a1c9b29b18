import numpy as np
import pytest

from ptychomg import kernels
from ptychomg.field import standard_scan
from ptychomg.forward import simulate


def rand_field(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    with kernels.use_backend(request.param):
        yield request.param


@pytest.fixture
def problem16(rng):
    """Random 16x16, 9-probe instance: (geometry, data, truth)."""
    g = standard_scan(16)
    truth = rand_field(rng, 16)
    return g, simulate(truth, g), truth


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
