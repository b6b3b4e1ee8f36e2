import numpy as np
import pytest

from ctinr.geometry import GridSpec, make_fan_geometry


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_grid():
    return GridSpec(16, 100.0)


@pytest.fixture
def tiny_geom(tiny_grid):
    return make_fan_geometry(8, 24, tiny_grid)


@pytest.fixture
def small_grid():
    return GridSpec(32, 100.0)


@pytest.fixture
def small_geom(small_grid):
    return make_fan_geometry(16, 48, small_grid)
