import numpy as np
import pytest

from fraccyl.constants import FractionalParams
from fraccyl.grids import make_cross_section_grid, make_cylinder_grid


@pytest.fixture(scope="session")
def cross():
    return make_cross_section_grid(-1.0, 1.0, 0.25)


@pytest.fixture(scope="session")
def cyl(cross):
    return make_cylinder_grid(2.0, cross, 0.25)


@pytest.fixture(scope="session")
def params1():
    return FractionalParams(1, 0.9, 2.5)


@pytest.fixture(scope="session")
def params2():
    return FractionalParams(2, 0.9, 2.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
