import numpy as np
import pytest

from switchmfg import (GridFunction, ModelSpec, OccupationFlux,
                       RewardScheme, TimeGrid, exploitability, fp_step,
                       init_fp, payoff_J, payoff_terms, project_to_D, run_fp,
                       sup_norm)
from switchmfg.fp import best_response
from switchmfg.model import AggregateProgress

from conftest import exp_progress


def single_regime_flux(grid):
    m = GridFunction(grid, np.exp(-grid.nodes)[:, None])
    w = GridFunction(grid, np.zeros((grid.n_steps + 1, 1, 1)))
    return OccupationFlux(m=m, w=w)


def test_payoff_single_regime_equilibrium(single_spec, single_grid):
    # m = e^{-t}, rho = 1 - e^{-t}: J = int e^{-2t} dt = 1/2; initial entropy 0
    flux = single_regime_flux(single_grid)
    rho = exp_progress(single_grid)
    assert payoff_J(flux, rho, single_spec, eta=0.4) == pytest.approx(0.5, abs=1e-4)


def test_payoff_zero_flux_has_zero_entropy(pair_spec):
    grid = TimeGrid.for_model(pair_spec, tail_tol=1e-4)
    m = GridFunction(grid, np.exp(-grid.nodes)[:, None] * np.array([0.5, 0.5]))
    w = GridFunction(grid, np.zeros((grid.n_steps + 1, 2, 2)))
    flux = OccupationFlux(m=m, w=w)
    terms = payoff_terms(flux, exp_progress(grid), pair_spec, eta=0.7)
    assert terms.entropy == 0.0
    assert terms.switching_cost == 0.0


def test_payoff_reward_term_scales_linearly(single_spec, single_grid):
    flux = single_regime_flux(single_grid)
    rho = exp_progress(single_grid)
    base = payoff_terms(flux, rho, single_spec, eta=0.3)
    doubled_spec = ModelSpec(u=single_spec.u, c=single_spec.c, g=single_spec.g,
                             reward=RewardScheme.linear(2, 2))
    doubled = payoff_terms(flux, rho, doubled_spec, eta=0.3)
    # doubling is an exact float operation: bitwise equality of the terms
    assert doubled.reward == 2.0 * base.reward
    scaled_spec = ModelSpec(u=single_spec.u, c=single_spec.c, g=single_spec.g,
                            reward=RewardScheme.linear(1.7, 1.7))
    scaled = payoff_terms(flux, rho, scaled_spec, eta=0.3)
    assert scaled.reward == pytest.approx(1.7 * base.reward, rel=1e-14)


def test_payoff_rejects_flux_out_of_empty_regime(pair_spec):
    grid = TimeGrid(h=0.01, n_steps=100)
    m = np.zeros((101, 2))
    m[:, 0] = np.exp(-grid.nodes)
    w = np.zeros((101, 2, 2))
    w[:, 1, 0] = 0.1  # mass-less regime 2 emits flux
    flux = OccupationFlux(m=GridFunction(grid, m), w=GridFunction(grid, w))
    with pytest.raises(ValueError):
        payoff_J(flux, exp_progress(grid), pair_spec, eta=0.5)


def test_fp_first_step_replaces_initial_average(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-4)
    state0 = init_fp(desk_spec, 0.2, grid=grid)
    br0 = best_response(desk_spec, 0.2, state0.rho, grid)
    state1 = fp_step(state0, desk_spec, 0.2)
    assert np.array_equal(state1.m.values, br0.flux.m.values)
    assert np.array_equal(state1.w.values, br0.flux.w.values)


def test_fp_second_step_is_pairwise_mean(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-4)
    state0 = init_fp(desk_spec, 0.2, grid=grid)
    state1 = fp_step(state0, desk_spec, 0.2)
    br1 = best_response(desk_spec, 0.2, state1.rho, grid)
    state2 = fp_step(state1, desk_spec, 0.2)
    mean = 0.5 * br1.flux.m.values + 0.5 * state1.m.values
    assert np.allclose(state2.m.values, mean, rtol=0, atol=1e-16)


def test_fp_cesaro_identity_at_five(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-4)
    state = init_fp(desk_spec, 0.2, grid=grid)
    responses = []
    for _ in range(5):
        responses.append(best_response(desk_spec, 0.2, state.rho, grid))
        state = fp_step(state, desk_spec, 0.2)
    mean = sum(r.flux.m.values for r in responses) / 5.0
    assert np.max(np.abs(state.m.values - mean)) < 1e-14


def test_fp_consistency_identity_every_iteration(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-4)
    state = init_fp(desk_spec, 0.2, grid=grid)
    for _ in range(4):
        state = fp_step(state, desk_spec, 0.2)
        assert np.all(state.m.values.sum(axis=1) + state.rho.values == 1.0)


def test_fp_single_regime_converges_immediately(single_spec, single_grid):
    state, report = run_fp(single_spec, 0.5, max_iters=5, grid=single_grid)
    # only one strategy exists: exploitability vanishes from the start
    assert state.history[0].exploit == pytest.approx(0.0, abs=1e-10)
    exact = 1.0 - np.exp(-single_grid.nodes)
    assert sup_norm(state.rho, GridFunction(single_grid, exact)) < 1e-8


def test_fp_single_regime_second_iteration_exact(single_spec, single_grid):
    state, _ = run_fp(single_spec, 0.5, max_iters=3, grid=single_grid,
                      tol_exploit=-1.0)
    recs = {r.n: r for r in state.history}
    assert 1 in recs and abs(recs[1].exploit) <= 1e-8


def test_exploitability_zero_at_fixed_arguments(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-4)
    state = init_fp(desk_spec, 0.2, grid=grid)
    assert exploitability(state, state.flux(), desk_spec, 0.2) == 0.0


def test_exploitability_positive_from_zero_guess(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-4)
    zero = project_to_D(GridFunction(grid, np.zeros(grid.n_steps + 1)),
                        desk_spec.u_max)
    state = init_fp(desk_spec, 0.2, grid=grid, rho_init=zero)
    state = fp_step(state, desk_spec, 0.2)
    assert state.history[0].exploit > 0.0


def test_exploitability_never_below_numerical_floor(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-4)
    state, report = run_fp(desk_spec, 0.2, max_iters=60, grid=grid,
                           stop_early=False)
    for rec in state.history:
        assert rec.exploit >= -1e-8 * (1.0 + abs(rec.payoff))


def test_fp_iterates_stay_feasible(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-4)
    state, _ = run_fp(desk_spec, 0.2, max_iters=20, grid=grid)
    # constructor of AggregateProgress revalidates; also check increments
    AggregateProgress(grid, state.rho.values)
    assert np.all(np.diff(state.rho.values) <= desk_spec.u_max * grid.h + 1e-12)


def test_fp_two_initial_guesses_agree_under_convexity(desk_spec):
    grid = TimeGrid.for_model(desk_spec, tail_tol=1e-4)
    assert desk_spec.reward.is_strictly_convex
    zero = project_to_D(GridFunction(grid, np.zeros(grid.n_steps + 1)),
                        desk_spec.u_max)
    fast = project_to_D(
        GridFunction(grid, np.minimum(desk_spec.u_max * grid.nodes, 1.0)),
        desk_spec.u_max)
    sA, _ = run_fp(desk_spec, 0.2, max_iters=2000, grid=grid, rho_init=zero,
                   tol_exploit=1e-9)
    sB, _ = run_fp(desk_spec, 0.2, max_iters=2000, grid=grid, rho_init=fast,
                   tol_exploit=1e-9)
    assert sup_norm(sA.rho, sB.rho) <= 1e-4


def test_run_fp_rejects_zero_budget(single_spec, single_grid):
    with pytest.raises(ValueError):
        run_fp(single_spec, 0.5, max_iters=0, grid=single_grid)


def test_divergence_warning_detects_flat_stretch():
    from switchmfg.fp import IterationRecord, _divergence_warning
    decaying = tuple(IterationRecord(n, 1.0 / (n + 1), 0.0, 0.0)
                     for n in range(120))
    assert not _divergence_warning(decaying)
    stuck = tuple(IterationRecord(n, 1.0 + (n // 10) * 0.01, 0.0, 0.0)
                  for n in range(120))
    assert _divergence_warning(stuck)
