"""Shared fixtures: a small three-asset market with common volatility rows."""

import numpy as np
import pytest

from curvlab.marketsim import ItoModel, calibrate_arbitrage_free
from curvlab.paths import TimeGrid

N_ASSETS = 3


def base_model() -> ItoModel:
    """Three lognormal assets, two Brownian factors, common vol rows."""
    r0 = np.array([0.03, 0.035, 0.025])
    return ItoModel(
        alpha=0.05 - r0,
        sigma=np.tile([0.2, 0.05], (N_ASSETS, 1)),
        a=np.full(N_ASSETS, 0.002),
        b=np.tile([0.01, -0.005], (N_ASSETS, 1)),
        s0=np.ones(N_ASSETS),
        r0=r0,
    )


@pytest.fixture(scope="session")
def model():
    return base_model()


@pytest.fixture(scope="session")
def calib(model):
    grid = TimeGrid(np.linspace(0.0, 2.0, 101))
    return calibrate_arbitrage_free(model, grid, n_scenarios=400, seed=11)
