import numpy as np
import pytest

from elax.euler2d import FlowState2D, NamedInitialCondition, initial_vorticity
from elax.euler3d import FlowState3D, initial_vorticity3d
from elax.spectral import FourierField, GridSpec


@pytest.fixture(scope="session")
def grid16():
    return GridSpec(2, 16)


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(2, 32)


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(2, 64)


@pytest.fixture(scope="session")
def grid3d16():
    return GridSpec(3, 16)


@pytest.fixture(scope="session")
def grid3d32():
    return GridSpec(3, 32)


def flow2d(name, n, **kwargs):
    grid = GridSpec(2, n)
    return FlowState2D.from_vorticity(initial_vorticity(NamedInitialCondition(name, **kwargs), grid))


def flow3d(name, n, **kwargs):
    grid = GridSpec(3, n)
    return FlowState3D.from_vorticity(initial_vorticity3d(NamedInitialCondition(name, **kwargs), grid))


def physical_field(grid, values, real=False):
    values = np.asarray(values)
    if values.ndim == grid.dim:
        values = values[None]
    return FourierField.from_physical(grid, values, real=real)


@pytest.fixture(scope="session")
def shear64():
    return flow2d("shear", 64)


@pytest.fixture(scope="session")
def cellular16():
    return flow2d("cellular", 16)


@pytest.fixture(scope="session")
def random32():
    return flow2d("random_smooth", 32)
