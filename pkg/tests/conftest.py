import numpy as np
import pytest

from padefd import WeightFunction


@pytest.fixture(scope="session")
def unit_weight():
    """The reference weight: 1 on [0, 3], 0 elsewhere."""
    return WeightFunction.constant(1.0, 0.0, 3.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.Generator(np.random.Philox(20240601))
