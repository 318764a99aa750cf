import numpy as np
import pytest

from sphere_gridder.data_structures import BaselineSet, ChunkSet, PixelSet
from sphere_gridder.partition import lattice_bin


def random_cap_points(rng, n: int, fov_deg: float = 30.0) -> np.ndarray:
    """
    Uniformly random unit vectors on the cap of diameter fov_deg around +z.
    """
    cos_max = np.cos(np.deg2rad(fov_deg) / 2)
    z = rng.uniform(cos_max, 1.0, n)
    azimuth = rng.uniform(0, 2 * np.pi, n)
    radius = np.sqrt(1 - z**2)
    points = np.stack([radius * np.cos(azimuth), radius * np.sin(azimuth), z], axis=1)
    return points / np.linalg.norm(points, axis=1, keepdims=True)


def random_baseline_points(rng, n: int, scale: float = 200.0) -> np.ndarray:
    """
    Baselines filling a flattened box, w a quarter of u and v.
    """
    return rng.uniform(-1, 1, (n, 3)) * np.array([scale, scale, scale / 4])


def clustered_points(rng, n: int, n_clusters: int = 5, spread: float = 1.0, scale: float = 100.0) -> np.ndarray:
    centers = rng.uniform(-scale, scale, (n_clusters, 3))
    labels = rng.integers(0, n_clusters, n)
    return centers[labels] + spread * rng.standard_normal((n, 3))


def grid_chunks(points: np.ndarray, splits) -> ChunkSet:
    """
    Cut the bounding box of points into splits[k] equal slabs per axis.
    """
    extents = points.max(axis=0) - points.min(axis=0)
    h = np.where(extents > 0, extents / np.asarray(splits) * (1 + 1e-6), 1.0)
    return lattice_bin(points, h)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def make_instance():
    """
    Factory of random (baselines, pixels) pairs.
    """

    def _make(seed: int, n_vis: int, n_pix: int, scale: float = 200.0, fov_deg: float = 30.0, weighted: bool = False):
        rng = np.random.default_rng(seed)
        baselines = BaselineSet(random_baseline_points(rng, n_vis, scale))
        weights = rng.uniform(0.5, 1.5, n_pix) if weighted else None
        pixels = PixelSet(random_cap_points(rng, n_pix, fov_deg), weights)
        return baselines, pixels

    return _make
