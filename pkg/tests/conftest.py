import numpy as np
import pytest

from switchmfg import (AggregateProgress, GridFunction, ModelSpec,
                       RewardScheme, TimeGrid, consistency_rho)


@pytest.fixture(scope="session")
def desk_spec():
    # 3-regime working instance: strictly convex reward, strict triangle costs
    return ModelSpec(u=[0.5, 1.0, 2.0], c=[0.0, 0.05, 0.2],
                     g=[[0.0, 0.1, 0.15], [0.1, 0.0, 0.1], [0.15, 0.1, 0.0]],
                     reward=RewardScheme.power(1, 2))


@pytest.fixture(scope="session")
def desk_grid(desk_spec):
    return TimeGrid.for_model(desk_spec)


@pytest.fixture(scope="session")
def single_spec():
    return ModelSpec(u=[1.0], c=[0.0], g=[[0.0]],
                     reward=RewardScheme.linear(1, 1))


@pytest.fixture(scope="session")
def single_grid(single_spec):
    return TimeGrid.for_model(single_spec)


@pytest.fixture(scope="session")
def pair_spec():
    return ModelSpec(u=[1.0, 2.0], c=[0.0, 0.1], g=[[0.0, 0.1], [0.1, 0.0]],
                     reward=RewardScheme.linear(1, 1))


def exp_progress(grid, rate=1.0):
    """rho(t) = 1 - e^{-rate t} sampled on the grid."""
    return AggregateProgress(grid, 1.0 - np.exp(-rate * grid.nodes))


def random_progress(spec, grid, rng):
    """Random feasible aggregate: piecewise-constant efforts regenerated
    through the consistency ODE."""
    n_knots = int(rng.integers(2, 8))
    knots = np.sort(rng.uniform(0.0, grid.horizon, n_knots))
    levels = rng.uniform(spec.u_min, spec.u_max, n_knots + 1)
    theta = levels[np.searchsorted(knots, grid.nodes)]
    return consistency_rho(GridFunction(grid, theta), spec)
