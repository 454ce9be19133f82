"""Finite-population simulation under a randomized switching policy.

Each agent runs an independent continuous-time regime chain (sampled by
thinning against a constant dominating rate) plus a unit-exponential
arrival clock inverted exactly on the piecewise-constant effort path.
Empirical occupancy and progress are compared against the mean-field ODE
solutions for the same policy.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .forward import aggregate_progress, solve_forward
from .model import GridFunction
from .paths import SwitchingPath

# disjoint stream labels hung off the master seed
_STREAM_POPULATION = 1
_STREAM_POLICY_PAYOFF = 2
_STREAM_CONSTANT_DEV = 3
_STREAM_ORACLE_DEV = 4


@dataclass(frozen=True)
class SimConfig:
    n_agents: int
    seed: int
    record_stride: int = 1

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("need at least one agent")
        if self.record_stride < 1:
            raise ValueError("record stride must be >= 1")


def _agent_rng(seed, stream, index):
    return np.random.default_rng([seed, stream, index])


def rate_bound(policy):
    """Dominating rate: the largest off-diagonal entry over nodes and pairs.

    Linear interpolation between nodes never exceeds the node maximum, so
    thinning against this bound is exact.
    """
    K = policy.K
    if K == 1:
        return 0.0
    off = policy.pi.values.copy()
    off[:, np.arange(K), np.arange(K)] = 0.0
    return float(off.max())


@njit(cache=True)
def _thin_chain(pi, h, bound, k0, T, rng, sig_buf, kap_buf):
    """Sample regime jumps by thinning; returns the switch count or -1 when
    the buffer is too small (caller retries with a fresh identical rng)."""
    K = pi.shape[1]
    if bound <= 0.0 or K == 1:
        return 0
    lam = (K - 1) * bound
    n = pi.shape[0] - 1
    t = 0.0
    k = k0
    cnt = 0
    while True:
        t += rng.exponential(1.0 / lam)
        if t >= T:
            return cnt
        r = int(rng.integers(0, K - 1))
        j = r + 1 if r >= k else r
        pos = t / h
        i = int(pos)
        if i > n - 1:
            i = n - 1
        frac = pos - i
        rate = pi[i, k, j] + frac * (pi[i + 1, k, j] - pi[i, k, j])
        if rng.random() * bound < rate:
            if cnt >= sig_buf.shape[0]:
                return -1
            sig_buf[cnt] = t
            kap_buf[cnt] = j
            k = j
            cnt += 1


@njit(cache=True)
def _draw_initial(delta_cum, x):
    k = 0
    K = delta_cum.shape[0]
    while k < K - 1 and x >= delta_cum[k]:
        k += 1
    return k


def _sample_jumps(policy, rng, bound):
    """Initial draw plus thinned jump times; deterministic given the rng."""
    T = policy.grid.horizon
    delta_cum = np.cumsum(policy.delta)
    k0 = _draw_initial(delta_cum, rng.random())
    cap = 64
    state = rng.bit_generator.state
    while True:
        sig_buf = np.empty(cap)
        kap_buf = np.empty(cap, dtype=np.int64)
        cnt = _thin_chain(policy.pi.values, policy.grid.h, bound, k0, T,
                          rng, sig_buf, kap_buf)
        if cnt >= 0:
            break
        cap *= 4
        rng.bit_generator.state = state
    sigma = np.concatenate(([0.0], sig_buf[:cnt]))
    kappa = np.concatenate(([k0], kap_buf[:cnt]))
    return SwitchingPath(sigma=sigma, kappa=kappa)


def sample_path(policy, rng):
    """One effort path from (pi, delta), truncated at the grid horizon."""
    return _sample_jumps(policy, rng, rate_bound(policy))


def arrival_time(path, spec, clock):
    """Exact inversion of the cumulative effort against a unit-exponential
    draw; +inf when the clock outlives the (untruncated) path tail."""
    theta_acc = 0.0
    sig = path.sigma
    kap = path.kappa
    for seg in range(sig.shape[0]):
        a = sig[seg]
        b = sig[seg + 1] if seg + 1 < sig.shape[0] else np.inf
        u_k = spec.u[kap[seg]]
        theta_next = theta_acc + u_k * (b - a) if np.isfinite(b) else np.inf
        if clock <= theta_next:
            return float(a + (clock - theta_acc) / u_k)
        theta_acc = theta_next
    return np.inf


@njit(cache=True)
def _node_ceil(t, h, cap):
    """Index of the first grid node at or after time t, capped."""
    i = int(np.ceil(t / h))
    if i * h < t:
        i += 1
    if i > cap:
        i = cap
    return i


@njit(cache=True)
def _accumulate_alive(alive_diff, sigma, kappa, tau, h, n):
    """Difference-array update: +1 on the node range where the agent is
    alive in each regime (nodes t with sigma_l <= t < min(sigma_{l+1}, tau))."""
    nseg = sigma.shape[0]
    for seg in range(nseg):
        a = sigma[seg]
        if tau <= a:
            break
        if seg + 1 < nseg:
            b = sigma[seg + 1]
            if tau < b:
                b = tau
        else:
            b = tau
        lo = _node_ceil(a, h, n + 1)
        hi = _node_ceil(b, h, n + 1)
        if hi > lo:
            k = kappa[seg]
            alive_diff[lo, k] += 1
            alive_diff[hi, k] -= 1


@dataclass(frozen=True)
class PopulationReport:
    n_agents: int
    seed: int
    m_hat: GridFunction
    rho_hat: GridFunction
    initial_counts: np.ndarray
    sup_rho_gap: float
    sup_m_gap: float

    def to_dict(self):
        return {
            "n_agents": self.n_agents,
            "seed": self.seed,
            "initial_counts": self.initial_counts.tolist(),
            "sup_rho_gap": self.sup_rho_gap,
            "sup_m_gap": self.sup_m_gap,
        }


def simulate_population(spec, policy, config):
    """Empirical occupancy/progress of n_agents independent agents, with
    sup-norm gaps against the mean-field ODE solutions for the policy."""
    grid = policy.grid
    n = grid.n_steps
    K = policy.K
    bound = rate_bound(policy)
    alive_diff = np.zeros((n + 2, K), dtype=np.int64)
    initial_counts = np.zeros(K, dtype=np.int64)
    for a in range(config.n_agents):
        rng = _agent_rng(config.seed, _STREAM_POPULATION, a)
        path = _sample_jumps(policy, rng, bound)
        clock = rng.exponential(1.0)
        tau = arrival_time(path, spec, clock)
        initial_counts[path.kappa[0]] += 1
        _accumulate_alive(alive_diff, path.sigma, path.kappa, tau, grid.h, n)
    m_hat = np.cumsum(alive_diff[:n + 1], axis=0) / config.n_agents
    # progress from the integer alive totals: monotone by construction,
    # unlike a float sum over per-regime frequencies
    alive_total = np.cumsum(alive_diff[:n + 1].sum(axis=1))
    rho_hat = 1.0 - alive_total / config.n_agents

    flux = solve_forward(spec, policy, grid)
    rho_ode = aggregate_progress(flux)
    sup_rho = float(np.max(np.abs(rho_hat - rho_ode.values)))
    sup_m = float(np.max(np.abs(m_hat - flux.m.values)))
    return PopulationReport(
        n_agents=config.n_agents, seed=config.seed,
        m_hat=GridFunction(grid, m_hat),
        rho_hat=GridFunction(grid, rho_hat),
        initial_counts=initial_counts,
        sup_rho_gap=sup_rho, sup_m_gap=sup_m)


def _path_running_payoff(path, spec, tau, T):
    """Running and switching costs accumulated up to min(tau, T)."""
    stop = min(tau, T)
    cost = 0.0
    sig = path.sigma
    for seg in range(sig.shape[0]):
        a = sig[seg]
        if stop <= a:
            break
        b = sig[seg + 1] if seg + 1 < sig.shape[0] else np.inf
        cost += spec.c[path.kappa[seg]] * (min(b, stop) - a)
        if seg + 1 < sig.shape[0] and sig[seg + 1] < stop:
            cost += spec.g[path.kappa[seg], path.kappa[seg + 1]]
    return cost


def _empirical_reward(rho_hat, tau):
    """Reward read from the frozen empirical aggregate (step function)."""
    grid = rho_hat.grid
    if tau >= grid.horizon:
        return rho_hat.values[-1]
    idx = min(int(tau / grid.h), grid.n_steps)
    return rho_hat.values[idx]


@dataclass(frozen=True)
class PayoffEstimate:
    label: str
    mean: float
    stderr: float
    n: int


@dataclass(frozen=True)
class DeviationReport:
    policy_payoff: PayoffEstimate
    deviations: tuple
    max_gain: float
    max_gain_stderr: float
    best_deviation: str

    def to_dict(self):
        return {
            "policy_payoff": vars(self.policy_payoff),
            "deviations": [vars(d) for d in self.deviations],
            "max_gain": self.max_gain,
            "max_gain_stderr": self.max_gain_stderr,
            "best_deviation": self.best_deviation,
        }


def _estimate_pure(path, spec, reward, rho_hat, seed, stream, n_samples, tag):
    T = rho_hat.grid.horizon
    vals = np.empty(n_samples)
    for i in range(n_samples):
        rng = _agent_rng(seed, stream, i)
        tau = arrival_time(path, spec, rng.exponential(1.0))
        r = reward(_empirical_reward(rho_hat, tau)) if np.isfinite(tau) else \
            reward(rho_hat.values[-1])
        vals[i] = r - _path_running_payoff(path, spec, tau, T)
    return PayoffEstimate(label=tag, mean=float(vals.mean()),
                          stderr=float(vals.std(ddof=1) / np.sqrt(n_samples)),
                          n=n_samples)


def _estimate_policy(policy, spec, reward, rho_hat, seed, n_samples):
    T = rho_hat.grid.horizon
    bound = rate_bound(policy)
    vals = np.empty(n_samples)
    for i in range(n_samples):
        rng = _agent_rng(seed, _STREAM_POLICY_PAYOFF, i)
        path = _sample_jumps(policy, rng, bound)
        tau = arrival_time(path, spec, rng.exponential(1.0))
        r = reward(_empirical_reward(rho_hat, tau)) if np.isfinite(tau) else \
            reward(rho_hat.values[-1])
        vals[i] = r - _path_running_payoff(path, spec, tau, T)
    return PayoffEstimate(label="policy", mean=float(vals.mean()),
                          stderr=float(vals.std(ddof=1) / np.sqrt(n_samples)),
                          n=n_samples)


def deviation_test(spec, policy, rho_hat, n_deviants, seed, oracle_paths=()):
    """Approximate-Nash sanity check against a frozen empirical aggregate.

    Estimates the (unregularized) payoff of following the policy and of
    deviating to each constant regime or supplied oracle path; reports the
    largest estimated gain with its standard error.
    """
    reward = spec.reward
    policy_est = _estimate_policy(policy, spec, reward, rho_hat, seed,
                                  n_deviants)
    deviations = []
    for k in range(spec.K):
        deviations.append(_estimate_pure(
            SwitchingPath.constant(k), spec, reward, rho_hat, seed,
            _STREAM_CONSTANT_DEV * 100 + k, n_deviants, f"constant-{k + 1}"))
    for i, path in enumerate(oracle_paths):
        deviations.append(_estimate_pure(
            path, spec, reward, rho_hat, seed,
            _STREAM_ORACLE_DEV * 100 + i, n_deviants, f"oracle-{i}"))
    gains = [(d.mean - policy_est.mean,
              float(np.hypot(d.stderr, policy_est.stderr)), d.label)
             for d in deviations]
    best = max(gains, key=lambda t: t[0])
    return DeviationReport(policy_payoff=policy_est, deviations=tuple(deviations),
                           max_gain=best[0], max_gain_stderr=best[1],
                           best_deviation=best[2])
