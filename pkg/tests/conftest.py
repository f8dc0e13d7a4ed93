import numpy as np
import pytest

from povmsim.sampling import random_density, random_hermitian


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def herm(d, seed):
    return random_hermitian(d, np.random.default_rng(seed))


def dens(d, seed, rank=None):
    return random_density(d, np.random.default_rng(seed), rank)


KET0 = np.array([[1.0, 0.0], [0.0, 0.0]])
KET1 = np.array([[0.0, 0.0], [0.0, 1.0]])
PLUS = np.full((2, 2), 0.5)
MINUS = np.array([[0.5, -0.5], [-0.5, 0.5]])
