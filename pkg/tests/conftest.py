import numpy as np
import pytest

from hypfrac.spectral import (
    ModelParams,
    RadialFn,
    SphericalTransform,
    radial_grid,
    spectral_grid,
)


@pytest.fixture(scope="session")
def ref3():
    """Reference transform pair on the default grids, n = 3."""
    return SphericalTransform(3, radial_grid(3), spectral_grid(3))


@pytest.fixture(scope="session")
def light3():
    """Lighter grids for unit tests that do not need reference accuracy."""
    return SphericalTransform(
        3,
        radial_grid(3, 30.0, width=0.5, order=12),
        spectral_grid(3, 30.0, width_low=0.3, width_high=0.6, order=12),
    )


@pytest.fixture(scope="session")
def params3():
    return ModelParams(3, 0.5, lam=1.0, beta=1.0, gamma=1.5)


@pytest.fixture()
def gaussian(ref3):
    return RadialFn(ref3.rgrid, np.exp(-ref3.rgrid.nodes ** 2), 1.0)


def l2_diff(grid, a, b):
    import math
    return math.sqrt(float(grid.weights @ (np.asarray(a) - np.asarray(b)) ** 2))
