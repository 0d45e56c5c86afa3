import os

# launch enough numba workers that thread-count independence can vary 1/4/8
os.environ.setdefault("NUMBA_NUM_THREADS", "8")

import numpy as np
import pytest

from brisk import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    kernels.warmup()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_convex_polygon(rng, center, radius, count=6):
    """Convex hull of random points in a disc; retries until >= 3 vertices."""
    from brisk.geometry import convex_hull

    while True:
        pts = center + radius * rng.uniform(-1.0, 1.0, size=(count, 2))
        hull = convex_hull(pts)
        if hull.shape[0] >= 3:
            return hull
