import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fractalva import build_level, gasket_spec, interval_spec, self_similar_measure, uniform_measure


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def triangle():
    return build_level(gasket_spec(), 0)


@pytest.fixture(scope="session")
def triangle_m(triangle):
    return uniform_measure(triangle)


@pytest.fixture(scope="session")
def gasket2():
    return build_level(gasket_spec(), 2)


@pytest.fixture(scope="session")
def gasket3():
    return build_level(gasket_spec(), 3)


@pytest.fixture(scope="session")
def interval1():
    return build_level(interval_spec(), 1)


def mean_zero(m, values):
    return values - (m.values @ values) / m.total
