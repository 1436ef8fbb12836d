import numpy as np
import pytest

from cheegerlab.grid import GridDomain, make_disc, make_square


@pytest.fixture(scope="session")
def square32():
    return make_square(1.0, 1 / 32)


@pytest.fixture(scope="session")
def disc64():
    return make_disc(1.0, 1 / 64)


def padded_domain(inner, h=1.0):
    """Embed an inner boolean block into a 2-pixel false border."""
    inner = np.asarray(inner, dtype=bool)
    ny, nx = inner.shape
    mask = np.zeros((ny + 4, nx + 4), dtype=bool)
    mask[2:2 + ny, 2:2 + nx] = inner
    return GridDomain(nx + 4, ny + 4, h, mask)
