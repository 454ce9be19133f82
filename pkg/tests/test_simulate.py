import numpy as np
import pytest
from scipy import stats

from switchmfg import (ModelSpec, RewardScheme, SimConfig, TimeGrid,
                       brute_force_best_response, deviation_test,
                       sample_path, simulate_population)
from switchmfg.fp import best_response, run_fp
from switchmfg.simulate import arrival_time

from test_forward import constant_policy


def test_sample_path_no_rates_stays_constant(pair_spec):
    grid = TimeGrid.for_model(pair_spec, tail_tol=1e-4)
    policy = constant_policy(grid, {}, [0.4, 0.6])
    path = sample_path(policy, np.random.default_rng(0))
    assert path.n_switches == 0


def test_sample_path_deterministic_initial_regime(pair_spec):
    grid = TimeGrid.for_model(pair_spec, tail_tol=1e-4)
    policy = constant_policy(grid, {(0, 1): 0.5, (1, 0): 0.5}, [1.0, 0.0])
    for seed in range(20):
        path = sample_path(policy, np.random.default_rng(seed))
        assert path.kappa[0] == 0


def test_sample_path_reproducible(pair_spec):
    grid = TimeGrid.for_model(pair_spec, tail_tol=1e-4)
    policy = constant_policy(grid, {(0, 1): 0.8, (1, 0): 0.8}, [0.5, 0.5])
    a = sample_path(policy, np.random.default_rng(42))
    b = sample_path(policy, np.random.default_rng(42))
    assert np.array_equal(a.sigma, b.sigma)
    assert np.array_equal(a.kappa, b.kappa)


def test_sample_path_jump_count_matches_two_state_chain():
    # symmetric constant rates: jumps on [0,T] are Poisson(lam*T)
    spec = ModelSpec(u=[1.0, 1.0], c=[0.0, 0.0], g=[[0, 0.2], [0.2, 0]],
                     reward=RewardScheme.linear(1, 1))
    grid = TimeGrid.for_model(spec, tail_tol=1e-6)
    lam = 0.8
    policy = constant_policy(grid, {(0, 1): lam, (1, 0): lam}, [0.5, 0.5])
    n_paths = 100_000
    counts = np.empty(n_paths)
    for p in range(n_paths):
        counts[p] = sample_path(policy, np.random.default_rng([77, p])).n_switches
    expected = lam * grid.horizon
    se = np.sqrt(expected / n_paths)
    assert abs(counts.mean() - expected) <= 3 * se


def test_sample_path_holding_times_exponential():
    spec = ModelSpec(u=[1.0, 1.0], c=[0.0, 0.0], g=[[0, 0.2], [0.2, 0]],
                     reward=RewardScheme.linear(1, 1))
    grid = TimeGrid.for_model(spec, tail_tol=1e-6)
    lam = 0.6
    policy = constant_policy(grid, {(0, 1): lam, (1, 0): lam}, [0.5, 0.5])
    # first holding time per path: later gaps pooled across a finite horizon
    # carry right-censoring length bias; here the censored fraction is
    # only exp(-lam*T) ~ 2.5e-4
    holds = []
    for p in range(8000):
        path = sample_path(policy, np.random.default_rng([101, p]))
        if path.n_switches >= 1:
            holds.append(path.sigma[1])
    holds = np.asarray(holds)
    assert holds.size > 7500
    res = stats.kstest(holds, "expon", args=(0.0, 1.0 / lam))
    assert res.pvalue >= 0.01


def test_arrival_time_inverts_cumulative_effort(pair_spec):
    from switchmfg import SwitchingPath
    path = SwitchingPath(sigma=[0.0, 2.0], kappa=[0, 1])
    # Theta(t) = t on [0,2], then 2 + 2(t-2)
    assert arrival_time(path, pair_spec, 1.0) == pytest.approx(1.0)
    assert arrival_time(path, pair_spec, 3.0) == pytest.approx(2.5)


def test_population_single_regime_close_to_mean_field(single_spec, single_grid):
    state, _ = run_fp(single_spec, 0.5, max_iters=3, grid=single_grid)
    br = best_response(single_spec, 0.5, state.rho, single_grid)
    pop = simulate_population(single_spec, br.policy,
                              SimConfig(n_agents=20_000, seed=12))
    exact = 1.0 - np.exp(-single_grid.nodes)
    assert np.max(np.abs(pop.rho_hat.values - exact)) <= 0.02


def test_population_single_agent_is_step_function(single_spec, single_grid):
    state, _ = run_fp(single_spec, 0.5, max_iters=3, grid=single_grid)
    br = best_response(single_spec, 0.5, state.rho, single_grid)
    pop = simulate_population(single_spec, br.policy,
                              SimConfig(n_agents=1, seed=5))
    vals = np.unique(pop.rho_hat.values)
    assert set(vals.tolist()) <= {0.0, 1.0}
    assert pop.rho_hat.values[0] == 0.0
    assert np.all(np.diff(pop.rho_hat.values) >= 0.0)


def test_population_initial_frequencies_binomial(pair_spec):
    grid = TimeGrid.for_model(pair_spec, tail_tol=1e-4)
    delta = np.array([0.3, 0.7])
    policy = constant_policy(grid, {(0, 1): 0.2, (1, 0): 0.2}, delta)
    n = 20_000
    pop = simulate_population(pair_spec, policy, SimConfig(n_agents=n, seed=8))
    freq = pop.initial_counts / n
    for k in range(2):
        se = np.sqrt(delta[k] * (1 - delta[k]) / n)
        assert abs(freq[k] - delta[k]) <= 3 * se


def test_population_progress_is_monotone_in_unit_range(pair_spec):
    grid = TimeGrid.for_model(pair_spec, tail_tol=1e-4)
    policy = constant_policy(grid, {(0, 1): 0.5, (1, 0): 0.3}, [0.5, 0.5])
    pop = simulate_population(pair_spec, policy, SimConfig(n_agents=500, seed=3))
    rho = pop.rho_hat.values
    assert rho[0] == 0.0
    assert np.all(np.diff(rho) >= 0.0)
    assert rho.max() <= 1.0


def test_population_bitwise_reproducible(pair_spec):
    grid = TimeGrid.for_model(pair_spec, tail_tol=1e-4)
    policy = constant_policy(grid, {(0, 1): 0.7, (1, 0): 0.4}, [0.5, 0.5])
    a = simulate_population(pair_spec, policy, SimConfig(n_agents=300, seed=9))
    b = simulate_population(pair_spec, policy, SimConfig(n_agents=300, seed=9))
    assert np.array_equal(a.rho_hat.values, b.rho_hat.values)
    assert np.array_equal(a.m_hat.values, b.m_hat.values)
    assert a.sup_rho_gap == b.sup_rho_gap


def test_population_error_shrinks_with_n(single_spec, single_grid):
    state, _ = run_fp(single_spec, 0.5, max_iters=3, grid=single_grid)
    br = best_response(single_spec, 0.5, state.rho, single_grid)
    exact = 1.0 - np.exp(-single_grid.nodes)
    gaps = []
    for n in (1000, 16_000):
        g = [np.max(np.abs(
            simulate_population(single_spec, br.policy,
                                SimConfig(n_agents=n, seed=s)).rho_hat.values
            - exact)) for s in (1, 2, 3)]
        gaps.append(np.mean(g))
    # 16x the agents should cut the error about 4x (CLT), generous band
    assert gaps[1] <= gaps[0] / 2.0


def test_deviation_single_regime_gain_is_noise(single_spec, single_grid):
    state, _ = run_fp(single_spec, 0.5, max_iters=3, grid=single_grid)
    br = best_response(single_spec, 0.5, state.rho, single_grid)
    pop = simulate_population(single_spec, br.policy,
                              SimConfig(n_agents=20_000, seed=31))
    dev = deviation_test(single_spec, br.policy, pop.rho_hat,
                         n_deviants=2000, seed=77)
    assert abs(dev.max_gain) <= 3 * dev.max_gain_stderr


def near_pure_instance():
    # wide switching costs with a dominant regime: the small-entropy policy
    # is almost surely the constant best regime
    spec = ModelSpec(u=[1.0, 2.0], c=[0.0, 0.02], g=[[0, 1.0], [1.0, 0]],
                     reward=RewardScheme.linear(1, 1))
    grid = TimeGrid.for_model(spec, tail_tol=1e-6)
    return spec, grid


def test_deviation_oracle_gain_within_tolerance():
    spec, grid = near_pure_instance()
    state, _ = run_fp(spec, 0.02, max_iters=100, grid=grid)
    br = best_response(spec, 0.02, state.rho, grid)
    pop = simulate_population(spec, br.policy, SimConfig(n_agents=30_000, seed=13))
    oracle, _ = brute_force_best_response(spec, state.rho, max_switches=2,
                                          switch_grid_stride=200)
    dev = deviation_test(spec, br.policy, pop.rho_hat, n_deviants=4000,
                         seed=19, oracle_paths=(oracle,))
    tol_vi = 5 * grid.h
    assert dev.max_gain <= tol_vi + 3 * dev.max_gain_stderr


def test_deviation_stderr_clt_scaling():
    # CLT: quadrupling the sample count halves the standard error (30% slack)
    spec, grid = near_pure_instance()
    state, _ = run_fp(spec, 0.05, max_iters=50, grid=grid)
    br = best_response(spec, 0.05, state.rho, grid)
    pop = simulate_population(spec, br.policy, SimConfig(n_agents=10_000, seed=2))
    small = deviation_test(spec, br.policy, pop.rho_hat, n_deviants=1500, seed=5)
    large = deviation_test(spec, br.policy, pop.rho_hat, n_deviants=6000, seed=5)
    ratio = large.policy_payoff.stderr / small.policy_payoff.stderr
    assert 0.5 / 1.3 <= ratio <= 0.5 * 1.3
