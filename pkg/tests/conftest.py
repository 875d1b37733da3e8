import numpy as np
import pytest

from bridgetree import DiscreteMeasure

# Mixture bank for the seeded experiment runs (1-d, supported on [-10, 10]).
GMM_MIXTURES = [
    [(-6.0, 1.2, 0.5), (5.0, 1.0, 0.5)],
    [(-2.0, 0.8, 1.0)],
    [(0.0, 2.5, 0.6), (7.0, 0.7, 0.4)],
    [(-7.0, 0.6, 0.3), (2.0, 1.5, 0.7)],
    [(4.0, 0.9, 0.5), (-4.0, 0.9, 0.5)],
]

GMM_SPEC = {
    "interval": [-10.0, 10.0],
    "mixtures": [{"components": [{"mean": m, "std": s, "weight": w} for m, s, w in mix]}
                 for mix in GMM_MIXTURES],
}


def random_measure(rng, n, dim=2, low=-10.0, high=10.0):
    """Random measure with weights bounded away from zero (min ~ 1/(3n))."""
    return DiscreteMeasure(rng.uniform(low, high, (n, dim)), rng.uniform(0.5, 1.5, n))


def random_measures(rng, sizes, dim=2, low=-10.0, high=10.0):
    return [random_measure(rng, n, dim, low, high) for n in sizes]


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
