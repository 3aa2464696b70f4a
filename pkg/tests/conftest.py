import numpy as np
import pytest

from settings import Settings

MIDPOINT = 1 / np.sqrt(3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def midpoint():
    """(x, y) at the middle of the d = 2 curve, where I = 2/3 and D = 1/3"""
    return MIDPOINT, MIDPOINT


@pytest.fixture
def settings(tmp_path):
    return Settings(samples=20_000, seed=11, threads=1, chunks=4, output_dir=str(tmp_path))


def random_matrix(rng, d):
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def random_density(rng, d, rank=None):
    g = rng.standard_normal((d, rank or d)) + 1j * rng.standard_normal((d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
