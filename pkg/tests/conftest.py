import numpy as np
import pytest

from chualab.circuit import table_one


@pytest.fixture
def p():
    return table_one()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running simulations")
    config.addinivalue_line("markers", "acceptance: exit criteria")
