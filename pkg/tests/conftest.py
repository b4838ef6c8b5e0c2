import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hallmhd.data import random_small_field
from hallmhd.spectral import GridSpec, ScalarSpectralField, SpectralField, symmetrize

settings.register_profile(
    "hallmhd", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("hallmhd")


def band_limited(grid: GridSpec, rng: np.random.Generator, vector: bool = True, kmax: int | None = None):
    """Random real field supported in the dealiased band."""
    k = grid.m_max if kmax is None else kmax
    m = np.abs(grid.lattice_index)
    box = (m[:, None, None] <= k) & (m[None, :, None] <= k) & (np.arange(grid.n // 2 + 1) <= k)
    shape = ((3,) if vector else ()) + grid.spectral_shape
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * box
    cls = SpectralField if vector else ScalarSpectralField
    return symmetrize(cls(grid, c))


@pytest.fixture
def grid16():
    return GridSpec(16, 2 * math.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def solenoidal_pair(grid16):
    return random_small_field(grid16, 1.0, 11, 1.0, 3.0), random_small_field(grid16, 1.0, 12, 1.0, 3.0)
