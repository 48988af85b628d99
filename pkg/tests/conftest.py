from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings

from forwardeig.fpcore import UNIT_ROUNDOFF

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")

U = UNIT_ROUNDOFF
U_FRACTION = Fraction(1, 2 ** 53)


def exact(x):
    """Exact rational value of a float, DoubleWord or (hi, lo) pair."""
    if isinstance(x, tuple):
        return Fraction(x[0]) + Fraction(x[1])
    if hasattr(x, "as_fraction"):
        return x.as_fraction()
    return Fraction(float(x))


def rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240611))


@pytest.fixture
def sym4():
    return np.array([
        [4.0, 1.0, 0.5, 0.0],
        [1.0, 3.0, 0.25, 0.125],
        [0.5, 0.25, 2.0, 0.0625],
        [0.0, 0.125, 0.0625, 1.0],
    ])


@pytest.fixture
def tmp_mtx(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text)
        return path
    return write
