import numpy as np
import pytest

from tcmv import MarketParams, ObjectiveSpec
from tcmv.numerics import TimeGrid


@pytest.fixture
def symmetric_params():
    """Two stocks with symmetric diagonal volatility and distinct drifts."""
    return MarketParams([0.2, 0.12], [[0.25, 0.0], [0.0, 0.25]], 0.04)


@pytest.fixture
def diagonal_params():
    """Two stocks with distinct diagonal volatilities and a bank account."""
    return MarketParams([0.2, 0.12], [[0.3, 0.0], [0.0, 0.2]], 0.04)


@pytest.fixture
def unit_grid():
    return TimeGrid(1.0, 1000)


@pytest.fixture
def objective():
    return ObjectiveSpec(3.0, 1.0)


def random_distinct_market(rng: np.random.Generator) -> MarketParams:
    """Random two-stock market whose volatility rows are well separated."""
    while True:
        sigma = rng.uniform(-0.4, 0.4, size=(2, 2))
        diff = sigma[0] - sigma[1]
        if diff @ diff > 0.01:
            alpha = rng.uniform(-0.1, 0.3, size=2)
            return MarketParams(alpha, sigma, 0.02)
