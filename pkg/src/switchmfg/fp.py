"""Fictitious play for the regularized mean-field competition.

Each round best-responds to the current aggregate (backward value solve,
Gibbs rates, softmax initial law, forward occupancy) and Cesàro-averages
the occupancy and flux; the aggregate is rebuilt from the averaged mass.
Exploitability -- the payoff gain of the fresh best response over the
averaged profile at the same aggregate -- is the convergence certificate.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .forward import OccupationFlux, aggregate_progress, consistency_rho, solve_forward
from .hjb import generator_row_sums, gibbs_policy, solve_hjb_backward
from .model import AggregateProgress, GridFunction, TimeGrid, _force_unit_sum, sup_norm


class IterationRecord(NamedTuple):
    n: int
    exploit: float
    sup_change: float
    payoff: float


@dataclass(frozen=True)
class PayoffTerms:
    reward: float
    running_cost: float
    switching_cost: float
    entropy: float
    initial_entropy: float

    @property
    def total(self):
        return (self.reward - self.running_cost - self.switching_cost
                - self.entropy - self.initial_entropy)


def _xlogx(x):
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = x[pos] * np.log(x[pos])
    return out


def payoff_terms(flux, rho, spec, eta):
    """Composite-trapezoid evaluation of the occupancy-form payoff."""
    m = flux.m.values
    w = flux.w.values
    h = flux.grid.h

    def trapz(f):
        return float(h * (f.sum() - 0.5 * (f[0] + f[-1])))

    r = np.asarray(spec.reward(rho.values), dtype=float)
    reward = trapz(r * (m @ spec.u))
    running = trapz(m @ spec.c)

    K = spec.K
    idx = np.arange(K)
    w_off = w.copy()
    w_off[:, idx, idx] = 0.0
    switching = trapz(np.einsum("tkj,kj->t", w_off, spec.g))

    m_k = m[:, :, None]
    active = w_off > 0.0
    if np.any(active & (m_k == 0.0)):
        raise ValueError(
            "positive flux out of an empty regime: relative entropy undefined")
    ent = np.zeros_like(w_off)
    # w*(log(w/m) - 1) with 0 log 0 = 0; tiny masses handled in log space
    safe_m = np.where(active, m_k, 1.0)
    ent[active] = (w_off * (np.log(np.where(active, w_off, 1.0))
                            - np.log(safe_m) - 1.0))[active]
    entropy = eta * trapz(ent.sum(axis=(1, 2)))

    initial = eta * float(_xlogx(m[0]).sum())
    return PayoffTerms(reward=reward, running_cost=running,
                       switching_cost=switching, entropy=entropy,
                       initial_entropy=initial)


def payoff_J(flux, rho, spec, eta):
    """Expected payoff of an occupancy/flux profile against an aggregate."""
    if flux.grid != rho.grid:
        raise ValueError("flux and rho must share a grid")
    return payoff_terms(flux, rho, spec, eta).total


def payoff_tail_bound(spec, grid):
    """Crude bound on the payoff mass ignored beyond the horizon."""
    r0 = float(spec.reward(0.0))
    return float(np.exp(-spec.u_min * grid.horizon)
                 * (r0 + np.max(spec.c) / spec.u_min))


@dataclass(frozen=True)
class FPState:
    n: int
    m: GridFunction
    w: GridFunction
    rho: AggregateProgress
    history: tuple

    @property
    def grid(self):
        return self.rho.grid

    def flux(self):
        return OccupationFlux(m=self.m, w=self.w)


class BestResponse(NamedTuple):
    value: object        # ValueFunction
    policy: object       # Policy
    flux: OccupationFlux


def best_response(spec, eta, rho, grid=None):
    """One sweep of the response map: value solve -> Gibbs policy -> occupancy."""
    value = solve_hjb_backward(spec, eta, rho, grid)
    policy = gibbs_policy(value, spec, eta)
    flux = solve_forward(spec, policy, value.grid)
    return BestResponse(value=value, policy=policy, flux=flux)


def default_initial_progress(spec, grid):
    """Slowest feasible aggregate: everyone grinding at the lowest rate."""
    theta = GridFunction(grid, np.full(grid.n_steps + 1, spec.u_min))
    return consistency_rho(theta, spec)


def init_fp(spec, eta, grid=None, rho_init=None):
    """Starting state: the best-response occupancy to an initial guess.

    Seeding with a feasible (policy-generated) occupancy keeps every
    exploitability value, including the first, nonnegative up to roundoff.
    """
    if grid is None:
        grid = rho_init.grid if rho_init is not None else TimeGrid.for_model(spec)
    if rho_init is None:
        rho_init = default_initial_progress(spec, grid)
    br = best_response(spec, eta, rho_init, grid)
    return FPState(n=0, m=br.flux.m, w=br.flux.w,
                   rho=aggregate_progress(br.flux), history=())


def exploitability(state, best_flux, spec, eta):
    """Payoff gain of a best response over the current averaged profile."""
    j_best = payoff_J(best_flux, state.rho, spec, eta)
    j_cur = payoff_J(state.flux(), state.rho, spec, eta)
    return j_best - j_cur


def _fp_step_with_response(state, spec, eta):
    n = state.n
    br = best_response(spec, eta, state.rho, state.grid)
    j_cur = payoff_J(state.flux(), state.rho, spec, eta)
    e_n = payoff_J(br.flux, state.rho, spec, eta) - j_cur

    w_new = 1.0 / (n + 1.0)
    w_old = n / (n + 1.0)
    m_avg = w_new * br.flux.m.values + w_old * state.m.values
    w_avg = w_new * br.flux.w.values + w_old * state.w.values
    # both operands carry exactly unit initial mass; strip averaging roundoff
    _force_unit_sum(m_avg[0])
    m_gf = GridFunction(state.grid, m_avg)
    rho_next = AggregateProgress(state.grid, 1.0 - m_avg.sum(axis=1))
    sup_change = sup_norm(rho_next, state.rho)
    rec = IterationRecord(n=n, exploit=e_n, sup_change=sup_change, payoff=j_cur)
    next_state = FPState(n=n + 1, m=m_gf, w=GridFunction(state.grid, w_avg),
                         rho=rho_next, history=state.history + (rec,))
    return next_state, br


def fp_step(state, spec, eta):
    """One fictitious-play round; returns the averaged successor state."""
    return _fp_step_with_response(state, spec, eta)[0]


def fit_log_rate(history):
    """Least-squares fit of the tail exploitability to C*log(n+2)/(n+1).

    Fits over the second half of the history; returns (C, r_squared).
    The model is a regression through the origin, so the coefficient of
    determination uses the uncentered total sum of squares (the standard
    convention for no-intercept fits).
    """
    if len(history) < 4:
        return float("nan"), float("nan")
    tail = history[len(history) // 2:]
    n = np.array([r.n for r in tail], dtype=float)
    e = np.array([r.exploit for r in tail], dtype=float)
    x = np.log(n + 2.0) / (n + 1.0)
    denom = float(np.dot(x, x))
    c = float(np.dot(x, e)) / denom if denom > 0.0 else float("nan")
    ss_res = float(np.sum((e - c * x) ** 2))
    ss_tot = float(np.sum(e ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return c, r2


def _divergence_warning(history, window=50):
    e = np.array([r.exploit for r in history])
    if e.size < window + 1:
        return False
    nondecreasing = np.diff(e) >= 0.0
    run = 0
    for flag in nondecreasing:
        run = run + 1 if flag else 0
        if run >= window:
            return True
    return False


@dataclass(frozen=True)
class ConservationChecks:
    mass_progress_exact: bool      # sum_k m_k + rho == 1 bitwise
    mass_decay: bool               # ||m||_1 <= exp(-u_min t) at every node
    generator_rows_zero: bool      # diagonal cancels off-diagonals exactly
    iterations: int


@dataclass(frozen=True)
class FPReport:
    converged: bool
    stop_reason: str
    iterations: int
    final_exploit: float
    final_sup_change: float
    payoff: float
    rate_constant: float
    rate_r_squared: float
    divergence_warning: bool
    quadrature_tail_bound: float
    conservation: ConservationChecks | None = None

    def to_dict(self):
        d = {
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "iterations": self.iterations,
            "final_exploit": self.final_exploit,
            "final_sup_change": self.final_sup_change,
            "payoff": self.payoff,
            "rate_constant": self.rate_constant,
            "rate_r_squared": self.rate_r_squared,
            "divergence_warning": self.divergence_warning,
            "quadrature_tail_bound": self.quadrature_tail_bound,
        }
        if self.conservation is not None:
            d["conservation"] = vars(self.conservation)
        return d


def run_fp(spec, eta, max_iters, tol_exploit=None, grid=None, rho_init=None,
           conservation_checks=False, stop_early=True):
    """Iterate fictitious play until the exploitability certificate closes.

    Stops when the exploitability drops below the tolerance (default
    1e-6*(1+|J|)), the aggregate stops moving (sup-change <= 1e-8), or the
    iteration budget runs out; stop_early=False runs the full budget
    regardless.  The report fits the tail of the exploitability sequence
    to C*log(n+2)/(n+1).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    state = init_fp(spec, eta, grid=grid, rho_init=rho_init)
    checks = {"mass": True, "decay": True, "rows": True} if conservation_checks else None
    decay_ref = None
    if conservation_checks:
        decay_ref = np.exp(-spec.u_min * state.grid.nodes)

    stop_reason = "max-iters"
    for _ in range(max_iters):
        state, br = _fp_step_with_response(state, spec, eta)
        rec = state.history[-1]
        if conservation_checks:
            from .hjb import generator_row_sums
            mass = state.m.values.sum(axis=1)
            checks["mass"] &= bool(np.all(mass + state.rho.values == 1.0))
            checks["decay"] &= bool(
                np.all(np.abs(state.m.values).sum(axis=1) <= decay_ref))
            checks["rows"] &= bool(
                np.all(generator_row_sums(br.policy.pi.values) == 0.0))
        if not stop_early:
            continue
        tol = tol_exploit if tol_exploit is not None else 1e-6 * (1.0 + abs(rec.payoff))
        if rec.exploit <= tol:
            stop_reason = "exploitability"
            break
        # round 0 replaces the seed outright; stall detection needs one
        # genuinely averaged round behind it
        if rec.n >= 1 and rec.sup_change <= 1e-8:
            stop_reason = "rho-change"
            break

    rec = state.history[-1]
    c, r2 = fit_log_rate(state.history)
    report = FPReport(
        converged=stop_reason != "max-iters" or rec.exploit <= (
            tol_exploit if tol_exploit is not None else 1e-6 * (1.0 + abs(rec.payoff))),
        stop_reason=stop_reason,
        iterations=len(state.history),
        final_exploit=rec.exploit,
        final_sup_change=rec.sup_change,
        payoff=rec.payoff,
        rate_constant=c,
        rate_r_squared=r2,
        divergence_warning=_divergence_warning(state.history),
        quadrature_tail_bound=payoff_tail_bound(spec, state.grid),
        conservation=ConservationChecks(
            mass_progress_exact=checks["mass"],
            mass_decay=checks["decay"],
            generator_rows_zero=checks["rows"],
            iterations=len(state.history)) if conservation_checks else None,
    )
    return state, report
