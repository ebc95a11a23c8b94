import numpy as np
import pytest

from thzreach.channel import default_absorption_table
from thzreach.geometry import build_e_hallway


@pytest.fixture(scope="session")
def hallway():
    """Default scene and endpoints, built once; everything downstream is pure."""
    return build_e_hallway()


@pytest.fixture(scope="session")
def scene(hallway):
    return hallway[0]


@pytest.fixture(scope="session")
def endpoints(hallway):
    return hallway[1]


@pytest.fixture(scope="session")
def table():
    return default_absorption_table()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260815)
