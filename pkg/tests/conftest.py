import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bubbleflow.grids import RadialGrid
from bubbleflow.spectral import build_z_profile, negative_eigenpair, spectrum_grid


@pytest.fixture(scope="session")
def spectral_pack():
    """Per-dimension (eigenpair, z_profile) at working precision, cached."""
    cache = {}

    def get(D, n=2**15):
        if (D, n) not in cache:
            ep = negative_eigenpair(D, spectrum_grid(D, n=n))
            cache[(D, n)] = (ep, build_z_profile(D, ep))
        return cache[(D, n)]

    return get


@pytest.fixture(scope="session")
def work_grid():
    """Default graded simulation grid per dimension, cached."""
    cache = {}

    def get(D, n=1024):
        if (D, n) not in cache:
            cache[(D, n)] = RadialGrid.geometric(D, n, 2e4, 1.02)
        return cache[(D, n)]

    return get
