import numpy as np
import pytest

from kpwaves import LatticeBox, SpectralField


@pytest.fixture(scope="session")
def box21():
    return LatticeBox(2, 1)


@pytest.fixture(scope="session")
def box22():
    return LatticeBox(2, 2)


@pytest.fixture(scope="session")
def box33():
    return LatticeBox(3, 3)


@pytest.fixture(scope="session")
def box44():
    return LatticeBox(4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_field(rng):
    """Factory for random complex fields, optionally real-symmetric."""

    def make(box, scale=1.0, hermitian=False):
        z = rng.standard_normal(box.size) + 1j * rng.standard_normal(box.size)
        u = SpectralField(box, scale * z)
        if hermitian:
            u = (u + u.conjugate_reflection()) * 0.5
        return u

    return make
