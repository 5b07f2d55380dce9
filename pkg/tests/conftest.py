import numpy as np
import pytest

from pqkit import geometry as geo

from helpers import ACCEPTANCE


@pytest.fixture(scope="session")
def flat():
    return geo.flat_model(2)


@pytest.fixture(scope="session")
def propo():
    return geo.propo_structure(2)


@pytest.fixture(scope="session")
def ones():
    return np.ones(8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
