import numpy as np
import pytest

from lagfsi.config import load_reference
from lagfsi.fem import FluidP1Space, P2Space
from lagfsi.geometry import disk_mesh
from lagfsi.material import MaterialParams
from lagfsi.pipeline import setup_problem


@pytest.fixture(scope="session")
def coarse():
    """Unit disk with a centred solid of radius 0.4, h = 0.25."""
    mesh = disk_mesh(1.0, [(0.0, 0.0, 0.4)], 0.25)
    return mesh, P2Space(mesh), FluidP1Space(mesh)


@pytest.fixture(scope="session")
def params():
    return MaterialParams(1.0, 1.0, 1.0)


@pytest.fixture(scope="session")
def reference():
    return setup_problem(load_reference())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
