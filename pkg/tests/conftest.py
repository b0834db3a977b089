from __future__ import annotations

import os
import sys

import numpy as np
import pytest

# Add project root to sys.path for "src" package
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.sampling.rng import replica_generator  # noqa: E402


@pytest.fixture
def rng() -> np.random.Generator:
    return replica_generator(12345, 0, 0)


@pytest.fixture
def ginibre(rng):
    def make(N: int) -> np.ndarray:
        g = rng.standard_normal((N, N, 2))
        return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0 * N)

    return make
