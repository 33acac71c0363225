import numpy as np
import pytest

from oqrw import WalkModel
from oqrw.operators import RecordModel


def random_kraus(rng, h, n):
    """n operators of size h whose stack is a Haar-ish isometry."""
    g = rng.standard_normal((n * h, h)) + 1j * rng.standard_normal((n * h, h))
    q, _ = np.linalg.qr(g)
    return list(q.reshape(n, h, h))


def random_density(rng, h, rank=None):
    rank = rank or h
    g = rng.standard_normal((h, rank)) + 1j * rng.standard_normal((h, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, h):
    g = rng.standard_normal((h, h)) + 1j * rng.standard_normal((h, h))
    return (g + g.conj().T) / 2


def random_walk(rng, d=None, h=None):
    d = d or int(rng.integers(1, 3))
    h = h or int(rng.integers(2, 4))
    return WalkModel(d, random_kraus(rng, h, 2 * d))


def random_record(rng, n=None, h=None):
    n = n or int(rng.integers(2, 4))
    h = h or int(rng.integers(2, 4))
    return RecordModel(random_kraus(rng, h, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
