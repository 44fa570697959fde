import numpy as np
import pytest

from csespm.ocp import synthetic_ocp_set
from csespm.params import CellParameters, DiscretizationConfig


@pytest.fixture(scope="session")
def params():
    return CellParameters()


@pytest.fixture(scope="session")
def ocp(params):
    return synthetic_ocp_set(params)


@pytest.fixture(scope="session")
def disc4():
    return DiscretizationConfig(N_r=4, N_e=6)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
