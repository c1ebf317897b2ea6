import numpy as np
import pytest

from geoscale import PointCloud


def make_flat_plane(n: int, seed: int, ambient_dim: int = 13) -> PointCloud:
    """Uniform sample of the unit square, zero-padded into ambient_dim."""
    rng = np.random.default_rng(seed)
    pts = np.zeros((n, ambient_dim))
    pts[:, :2] = rng.uniform(0.0, 1.0, (n, 2))
    return PointCloud(pts)


@pytest.fixture
def flat_plane_small() -> PointCloud:
    return make_flat_plane(600, seed=11)
