import numpy as np
import pytest

from prandtl_gevrey.fields import InitialDataSpec, make_initial_data
from prandtl_gevrey.grid import SpectralGrid

_VERDICTS: list[str] = []


def record(line: str) -> None:
    _VERDICTS.append(line)


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid32():
    return SpectralGrid(32, 257)


@pytest.fixture(scope="session")
def ref_state(grid32):
    return make_initial_data(grid32, InitialDataSpec())


@pytest.fixture(scope="session")
def compat_state(grid32):
    return make_initial_data(grid32, InitialDataSpec(compatible=True))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
