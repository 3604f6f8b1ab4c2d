import numpy as np
import pytest
from hypothesis import settings

from robinlab.green_mass import robin_mass_field
from robinlab.spectral import sphere_model, torus_model

settings.register_profile("robinlab", max_examples=25, deadline=None)
settings.load_profile("robinlab")


@pytest.fixture(scope="session")
def sphere16():
    return sphere_model(2, 4 * np.pi, 16)


@pytest.fixture(scope="session")
def sphere32():
    return sphere_model(2, 4 * np.pi, 32)


@pytest.fixture(scope="session")
def sphere64():
    return sphere_model(2, 4 * np.pi, 64)


@pytest.fixture(scope="session")
def torus16():
    return torus_model(np.eye(2), 16)


@pytest.fixture(scope="session")
def skew_torus():
    return torus_model([[1.0, 0.3], [0.0, 1.2]], 12)


@pytest.fixture(scope="session")
def sphere32_mass(sphere32):
    return robin_mass_field(sphere32)


@pytest.fixture(scope="session")
def torus16_mass(torus16):
    return robin_mass_field(torus16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
