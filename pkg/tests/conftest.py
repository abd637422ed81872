import numpy as np
import pytest

from bqbox import GridSpec


@pytest.fixture
def grid2d():
    return GridSpec(n=2, N=16, L=1.0)


@pytest.fixture
def grid2d_box():
    return GridSpec(n=2, N=16, L=2.0 * np.pi)


@pytest.fixture
def grid3d():
    return GridSpec(n=3, N=16, L=2.0 * np.pi)


@pytest.fixture
def grid3d_small():
    return GridSpec(n=3, N=8, L=1.0)
