import numpy as np
import pytest

from wipsim import (
    ArmModel,
    LqrWeights,
    PlantParams,
    build_linear_model,
    default_muscle_config,
    solve_care,
)


@pytest.fixture(scope="session")
def plant():
    return PlantParams()


@pytest.fixture(scope="session")
def arm():
    return ArmModel()


@pytest.fixture(scope="session")
def model(plant):
    return build_linear_model(plant)


@pytest.fixture(scope="session")
def gain(model):
    return solve_care(model, LqrWeights())


@pytest.fixture(scope="session")
def muscle_cfg():
    return default_muscle_config()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
