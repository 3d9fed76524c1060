import numpy as np
import pytest

from anisolab.grid import Grid


@pytest.fixture(scope="session")
def grid2_65():
    return Grid(2, 65)


@pytest.fixture(scope="session")
def grid2_129():
    return Grid(2, 129)


@pytest.fixture(scope="session")
def grid3_25():
    return Grid(3, 25)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
