"""Shared fixtures: the worked 3-item/2-agent instance and random factories."""

import numpy as np
import pytest

from efxkit import Instance, make_instance, normalize


@pytest.fixture
def i0_raw() -> Instance:
    """Three items, two agents; values chosen so agent sums are 8 and 4."""
    return make_instance([[4.0, 1.0], [2.0, 1.0], [2.0, 2.0]])


@pytest.fixture
def i0_norm(i0_raw) -> Instance:
    return normalize(i0_raw)


def random_instance(seed: int, m: int, n: int, dist: str = "uniform01") -> Instance:
    """Seeded instance factory used across the suite."""
    rng = np.random.default_rng(seed)
    if dist == "uniform01":
        values = rng.random((m, n))
    elif dist == "integer":
        values = rng.integers(1, 11, size=(m, n)).astype(float)
    elif dist == "identical":
        column = rng.random(m)
        values = np.tile(column[:, None], (1, n))
    else:
        raise ValueError(dist)
    return make_instance(values)


def random_polytope_point(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    """A random fractional allocation with rows on the simplex."""
    x = rng.random((m, n)) + 1e-3
    return x / x.sum(axis=1, keepdims=True)
