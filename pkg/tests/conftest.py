import numpy as np
import pytest

from helmdec.mesh import build_complex


@pytest.fixture(scope="session")
def cube4():
    return build_complex("unit_cube", 0.25)


@pytest.fixture(scope="session")
def cube2():
    return build_complex("unit_cube", 0.5)


@pytest.fixture(scope="session")
def lshape4():
    return build_complex("three_cube_L", 0.25)


@pytest.fixture(scope="session")
def pyramid4():
    return build_complex("pyramid", 0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
