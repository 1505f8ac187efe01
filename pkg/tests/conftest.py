import numpy as np
import pytest

from partialwave.radial import RadialProfile, build_frequency_grid, build_radial_grid
from partialwave.sphere import build_sphere_grid


@pytest.fixture(scope="session")
def rgrid():
    return build_radial_grid(1e-4, 30.0, 150, 400)


@pytest.fixture(scope="session")
def rgrid_small():
    return build_radial_grid(1e-4, 16.0, 100, 240)


@pytest.fixture(scope="session")
def fgrid():
    return build_frequency_grid(5.0, 300)


@pytest.fixture(scope="session")
def fgrid_wide():
    return build_frequency_grid(8.0, 440)


@pytest.fixture(scope="session")
def sgrid8():
    return build_sphere_grid(8)


@pytest.fixture(scope="session")
def sgrid16():
    return build_sphere_grid(16)


def bump_profile(fgrid, center=2.2, width=0.5, phase=0.4):
    vals = np.exp(-(((fgrid.nodes - center) / width) ** 2)) * np.exp(1j * phase)
    return RadialProfile(fgrid, vals, "frequency")


@pytest.fixture
def bump():
    return bump_profile
