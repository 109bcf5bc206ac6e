import math
from fractions import Fraction

import pytest

from contract_forge.model import TabulatedTypes, UniformTypes, discrete_types, tabulated_types, validate_instance

from corpus import discrete_corpus

HALF = Fraction(1, 2)
F_RUNNING = [[1, 0, 0], [0, 1, 0], [0, HALF, HALF], [0, 0, 1]]
GAMMAS_RUNNING = [0, 1, 3, 10]


@pytest.fixture(scope="session")
def running():
    return validate_instance(GAMMAS_RUNNING, F_RUNNING, [0, 10, 30], discrete_types([1, 4], [HALF, HALF]))


@pytest.fixture(scope="session")
def three_type():
    return validate_instance(GAMMAS_RUNNING, F_RUNNING, [0, 20, 35], discrete_types([1, 3], [HALF, HALF]))


@pytest.fixture(scope="session")
def uniform_running():
    identity = [[int(i == j) for j in range(4)] for i in range(4)]
    return validate_instance(GAMMAS_RUNNING, identity, [0, 10, 20, 30], UniformTypes(Fraction(12)))


def exponential_tabulation(upper=5, step=Fraction(1, 4)) -> TabulatedTypes:
    """Exponential(1) truncated to [0, upper], sampled at the knots.

    Truncation rescales G and g alike, so G/g = e^c - 1 at every knot.
    """
    grid = []
    c = Fraction(0)
    while c <= upper:
        grid.append(c)
        c += step
    norm = 1 - math.exp(-upper)
    cdf = [(1 - math.exp(-float(x))) / norm for x in grid]
    cdf[0], cdf[-1] = 0.0, 1.0
    dens = [math.exp(-float(x)) / norm for x in grid]
    return tabulated_types(grid, cdf, dens)


@pytest.fixture(scope="session")
def exponential_example():
    identity = [[int(i == j) for j in range(5)] for i in range(5)]
    return validate_instance([0, 1, 2, 3, 7], identity, [0, 1, 2, 3, 4], exponential_tabulation())


@pytest.fixture(scope="session")
def corpus():
    return discrete_corpus()
