import numpy as np
import pytest

from crosswind.model import (
    RollPlantParams,
    augment,
    continuous_roll_model,
    discretize_zoh,
)


@pytest.fixture(scope="session")
def nominal_params():
    return RollPlantParams()


@pytest.fixture(scope="session")
def nominal_cm(nominal_params):
    return continuous_roll_model(nominal_params)


@pytest.fixture(scope="session")
def nominal_dm(nominal_cm):
    return discretize_zoh(nominal_cm, Ts=0.1, Td=1.0)


@pytest.fixture(scope="session")
def nominal_am(nominal_dm):
    return augment(nominal_dm)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
