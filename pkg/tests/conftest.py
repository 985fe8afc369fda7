import numpy as np
import pytest

from shrinkcomb import Interferer, ScenarioConfig
from shrinkcomb.validate import make_instance

# Lines appended by the acceptance module; printed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def interference_cfg():
    return ScenarioConfig(ue_tx_power_dbm=14.0, interferers=(Interferer(-5.0),), data_len=200)


@pytest.fixture
def instance():
    return make_instance(3)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
