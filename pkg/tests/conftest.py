import numpy as np
import pytest

from shortlink.core import RandomStream


@pytest.fixture
def rng():
    """Fresh deterministic generator per test."""
    return RandomStream(20240, 0).generator()


def random_bits(generator, n):
    return generator.integers(0, 2, size=n, dtype=np.uint8)


def noiseless_llrs(bits, magnitude=20.0):
    """LLRs a decoder cannot misread: +mag for 0, -mag for 1."""
    return magnitude * (1.0 - 2.0 * np.asarray(bits, dtype=np.float64))
