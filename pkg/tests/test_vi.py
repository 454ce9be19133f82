import pytest

from switchmfg import (ModelSpec, RewardScheme, TimeGrid, SwitchingPath,
                       pure_payoff, solve_hjbvi, viscosity_residual)
from switchmfg.errors import ConfigError

from conftest import exp_progress


def test_vi_single_regime_closed_form(single_spec):
    grid = TimeGrid(h=1e-3, n_steps=20_000)
    rho = exp_progress(grid)
    value = solve_hjbvi(single_spec, rho)
    assert abs(value.values[0, 0] - 0.5) < 5e-3


def test_vi_residual_small_on_closed_form(single_spec):
    grid = TimeGrid(h=1e-3, n_steps=20_000)
    rho = exp_progress(grid)
    value = solve_hjbvi(single_spec, rho)
    res = viscosity_residual(value, single_spec, rho)
    assert res.sup_min_branch <= 5 * grid.h


def test_vi_huge_costs_reduce_to_constant_regimes():
    spec = ModelSpec(u=[1.0, 2.0], c=[0.0, 0.1], g=[[0, 1e3], [1e3, 0]],
                     reward=RewardScheme.linear(1, 1))
    grid = TimeGrid.for_model(spec, tail_tol=1e-6)
    rho = exp_progress(grid, rate=1.2)
    value = solve_hjbvi(spec, rho)
    tol = 5 * grid.h
    for k in range(2):
        oracle = pure_payoff(SwitchingPath.constant(k), rho, spec)
        assert abs(value.values[0, k] - oracle) <= tol


def test_vi_obstacle_consistency_everywhere(desk_spec, desk_grid):
    rho = exp_progress(desk_grid, rate=0.8)
    value = solve_hjbvi(desk_spec, rho)
    res = viscosity_residual(value, desk_spec, rho)
    assert res.min_obstacle >= 0.0


def test_vi_min_branch_residual_within_tolerance(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-5)
    rho = exp_progress(grid, rate=0.8)
    value = solve_hjbvi(desk_spec, rho)
    res = viscosity_residual(value, desk_spec, rho)
    assert res.sup_min_branch <= 5 * grid.h


def test_vi_residual_decays_at_first_order(pair_spec):
    sups = []
    for h in (2e-3, 1e-3):
        grid = TimeGrid(h=h, n_steps=int(round(14.0 / h)))
        rho = exp_progress(grid, rate=1.1)
        value = solve_hjbvi(pair_spec, rho)
        sups.append(viscosity_residual(value, pair_spec, rho).sup_min_branch)
    # halving h should halve the residual, 30% slack
    assert sups[1] <= 0.5 * 1.3 * sups[0]


def test_vi_step_restriction_is_enforced(pair_spec):
    grid = TimeGrid(h=0.6, n_steps=30)  # h*u_max = 1.2 >= 1
    rho = exp_progress(grid)
    with pytest.raises(ConfigError):
        solve_hjbvi(pair_spec, rho)
