import numpy as np
import pytest

from divgrid import build_domain
from divgrid.experiments import square_mask


@pytest.fixture
def square2():
    return build_domain(square_mask(2), connectivity="4")


@pytest.fixture
def path3():
    return build_domain([(0, 0), (1, 0), (2, 0)], connectivity="4")


@pytest.fixture
def path4():
    return build_domain([(i, 0) for i in range(4)], connectivity="4")


@pytest.fixture
def square3_8():
    return build_domain(square_mask(3), connectivity="8")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
