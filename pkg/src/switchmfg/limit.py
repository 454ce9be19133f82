"""Vanishing-entropy analysis and relaxed-equilibrium verification.

The sweep solves the regularized equilibrium along a decreasing ladder of
entropy levels and measures, per level, the sup-gap between the
regularized values and the obstacle-scheme solution at the same
equilibrium aggregate.  The verifier samples paths from a small-entropy
equilibrium policy and scores them with the value-evolution functional:
near the limit, almost every path should ride the maximal initial value.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .forward import consistency_rho
from .fp import run_fp
from .model import GridFunction, TimeGrid, sup_norm
from .paths import value_evolution_stats
from .simulate import _STREAM_POPULATION, _agent_rng, rate_bound, _sample_jumps
from .vi import solve_hjbvi

DEFAULT_ETAS = (0.5, 0.2, 0.1, 0.05, 0.02)


@dataclass(frozen=True)
class SweepEntry:
    eta: float
    gap: float
    exploit: float
    iterations: int
    payoff: float


@dataclass(frozen=True)
class SweepReport:
    entries: tuple
    rho_distances: tuple       # sup distances of consecutive equilibria
    failures: tuple            # (eta, message) pairs
    gap_nonincreasing: bool    # within 10% slack

    @property
    def etas(self):
        return tuple(e.eta for e in self.entries)

    @property
    def gaps(self):
        return tuple(e.gap for e in self.entries)

    def to_dict(self):
        return {
            "entries": [vars(e) for e in self.entries],
            "rho_distances": list(self.rho_distances),
            "failures": [list(f) for f in self.failures],
            "gap_nonincreasing": self.gap_nonincreasing,
        }


def value_gap(spec, rho, value_eta):
    """Sup distance between regularized values and the obstacle-scheme
    solution computed at the same aggregate."""
    v_vi = solve_hjbvi(spec, rho)
    return sup_norm(value_eta.values_fn, v_vi.values_fn), v_vi


def eta_sweep(spec, etas, max_iters, tol_exploit=None, grid=None,
              rho_init=None, keep_artifacts=False):
    """Run the regularized solver along a decreasing entropy ladder.

    Per level: fictitious play to equilibrium, obstacle solve at the
    equilibrium aggregate, gap bookkeeping.  A failed level is recorded
    and skipped.  Returns (SweepReport, artifacts); artifacts maps eta to
    (state, report, value, policy) when requested.
    """
    etas = tuple(etas)
    if any(np.diff(etas) >= 0.0):
        raise ValueError("entropy ladder must be strictly decreasing")
    if grid is None:
        grid = TimeGrid.for_model(spec)
    entries = []
    failures = []
    rho_prev = None
    rho_dist = []
    artifacts = {}
    for eta in etas:
        try:
            state, report = run_fp(spec, eta, max_iters=max_iters,
                                   tol_exploit=tol_exploit, grid=grid,
                                   rho_init=rho_init)
            from .fp import best_response
            br = best_response(spec, eta, state.rho, grid)
            gap, v_vi = value_gap(spec, state.rho, br.value)
        except SolverError as err:
            failures.append((eta, str(err)))
            continue
        entries.append(SweepEntry(eta=eta, gap=gap,
                                  exploit=report.final_exploit,
                                  iterations=report.iterations,
                                  payoff=report.payoff))
        if keep_artifacts:
            artifacts[eta] = (state, report, br.value, br.policy, v_vi)
        if rho_prev is not None:
            rho_dist.append(sup_norm(state.rho, rho_prev))
        rho_prev = state.rho
    gaps = [e.gap for e in entries]
    noninc = all(gaps[i + 1] <= 1.10 * gaps[i] for i in range(len(gaps) - 1))
    report = SweepReport(entries=tuple(entries), rho_distances=tuple(rho_dist),
                         failures=tuple(failures), gap_nonincreasing=noninc)
    return report, artifacts


def support_set(v0, nu):
    """Regimes within nu of the best initial value (1-based labels)."""
    v0 = np.asarray(v0)
    return tuple(int(k) + 1 for k in np.flatnonzero(v0 >= v0.max() - nu))


def default_support_margin(spec, grid):
    """Threshold scaled to the value-function discretization error."""
    return 10.0 * grid.h * spec.u_max * spec.reward.lipschitz


@dataclass(frozen=True)
class VerificationReport:
    eta: float
    n_paths: int
    seed: int
    y_tolerance: float
    fraction_within: float
    sup_dev_median: float
    sup_dev_p95: float
    max_positive_increment: float
    increment_tolerance: float
    monotone_fraction: float
    rho_consistency_gap: float
    value_gap: float
    support: tuple
    support_margin: float
    exploit: float
    quadrature_tail_bound: float

    def to_dict(self):
        d = dict(vars(self))
        d["support"] = list(self.support)
        return d


def verify_relaxed_equilibrium(spec, eta_small, max_iters, sample_count, seed,
                               grid=None, tol_exploit=None, y_tolerance=0.05,
                               support_margin=None):
    """End-to-end check that a small-entropy equilibrium behaves like a
    relaxed equilibrium of the unregularized competition.

    (a) regularized equilibrium at eta_small, (b) obstacle solve at its
    aggregate, (c) path sampling from the equilibrium policy, (d) per-path
    value-evolution statistics against max_k V_k(0), (e) aggregate
    regeneration from the sampled average effort, (f) support extraction.
    """
    if eta_small <= 0.0:
        raise ValueError("eta_small must be positive")
    if grid is None:
        grid = TimeGrid.for_model(spec)
    state, report = run_fp(spec, eta_small, max_iters=max_iters,
                           tol_exploit=tol_exploit, grid=grid)
    from .fp import best_response, payoff_tail_bound
    br = best_response(spec, eta_small, state.rho, grid)
    gap, v_vi = value_gap(spec, state.rho, br.value)

    bound = rate_bound(br.policy)
    paths = []
    for p in range(sample_count):
        rng = _agent_rng(seed, _STREAM_POPULATION, p)
        paths.append(_sample_jumps(br.policy, rng, bound))

    target = float(np.max(v_vi.values[0]))
    sup_dev, max_inc = value_evolution_stats(paths, v_vi, state.rho, spec,
                                             target)
    inc_tol = 5.0 * grid.h
    frac = float(np.mean(sup_dev <= y_tolerance))
    mono = float(np.mean(max_inc <= inc_tol))

    # average effort across sampled paths, then the regenerated aggregate;
    # per-path segments enter a difference array instead of per-node lookups
    theta_diff = np.zeros(grid.n_steps + 2)
    n = grid.n_steps

    def node_ceil(t):
        i = int(np.ceil(t / grid.h))
        if i * grid.h < t:
            i += 1
        return min(i, n + 1)

    for path in paths:
        sig = path.sigma
        for seg in range(sig.shape[0]):
            lo = node_ceil(sig[seg])
            hi = node_ceil(sig[seg + 1]) if seg + 1 < sig.shape[0] else n + 1
            if hi > lo:
                u_k = spec.u[path.kappa[seg]]
                theta_diff[lo] += u_k
                theta_diff[hi] -= u_k
    theta = np.cumsum(theta_diff[:n + 1]) / len(paths)
    rho_re = consistency_rho(GridFunction(grid, theta), spec)
    rho_gap = sup_norm(rho_re, state.rho)

    margin = (default_support_margin(spec, grid)
              if support_margin is None else support_margin)
    return VerificationReport(
        eta=eta_small, n_paths=sample_count, seed=seed,
        y_tolerance=y_tolerance, fraction_within=frac,
        sup_dev_median=float(np.median(sup_dev)),
        sup_dev_p95=float(np.percentile(sup_dev, 95)),
        max_positive_increment=float(np.max(max_inc)),
        increment_tolerance=inc_tol,
        monotone_fraction=mono,
        rho_consistency_gap=rho_gap,
        value_gap=gap,
        support=support_set(v_vi.values[0], margin),
        support_margin=margin,
        exploit=report.final_exploit,
        quadrature_tail_bound=payoff_tail_bound(spec, grid),
    ), (state, br, v_vi, paths)
