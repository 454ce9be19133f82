"""Forward propagation of the population occupancy under a switching policy.

m_k(t) is the mass still competing in regime k; it drains at the arrival
rate u_k and redistributes along the generator:

    m_k' = -u_k m_k + sum_j m_j pi_jk,   m_k(0) = delta_k.

The induced aggregate progress is rho = 1 - sum_k m_k and the flux
w_kj = m_k pi_kj is what fictitious play averages.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import SolverError
from .model import AggregateProgress, GridFunction

# RK4 is not positivity preserving; overshoots below this are numerical noise
POSITIVITY_SLACK = 1e-10


@dataclass(frozen=True)
class OccupationFlux:
    """Sub-probability occupancy m and switching flux w on a shared grid."""

    m: GridFunction      # (n+1, K)
    w: GridFunction      # (n+1, K, K), zero diagonal

    @property
    def grid(self):
        return self.m.grid

    @property
    def K(self):
        return self.m.values.shape[1]

    def mass(self):
        return self.m.values.sum(axis=1)


@njit(cache=True)
def _kfe_rhs(u, P, m, out):
    K = u.shape[0]
    for k in range(K):
        acc = -u[k] * m[k]
        for j in range(K):
            acc += m[j] * P[j, k]
        out[k] = acc


@njit(cache=True)
def _kfe_rk4_forward(u, pi, delta, h, slack):
    """RK4 sweep of the forward equation; generator interpolated linearly
    at half steps.  Returns (m, worst) where worst is the most negative
    mass encountered (0 when none)."""
    n = pi.shape[0] - 1
    K = u.shape[0]
    m = np.empty((n + 1, K))
    m[0] = delta
    k1 = np.empty(K)
    k2 = np.empty(K)
    k3 = np.empty(K)
    k4 = np.empty(K)
    tmp = np.empty(K)
    pmid = np.empty((K, K))
    half = 0.5 * h
    worst = 0.0
    for i in range(n):
        for a in range(K):
            for b in range(K):
                pmid[a, b] = 0.5 * (pi[i, a, b] + pi[i + 1, a, b])
        _kfe_rhs(u, pi[i], m[i], k1)
        for k in range(K):
            tmp[k] = m[i, k] + half * k1[k]
        _kfe_rhs(u, pmid, tmp, k2)
        for k in range(K):
            tmp[k] = m[i, k] + half * k2[k]
        _kfe_rhs(u, pmid, tmp, k3)
        for k in range(K):
            tmp[k] = m[i, k] + h * k3[k]
        _kfe_rhs(u, pi[i + 1], tmp, k4)
        for k in range(K):
            m[i + 1, k] = m[i, k] + (h / 6.0) * (
                k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
            if m[i + 1, k] < worst:
                worst = m[i + 1, k]
        if worst < -slack:
            return m, worst
    return m, worst


def solve_forward(spec, policy, grid=None):
    """Propagate the occupancy forward and attach the switching flux."""
    if grid is None:
        grid = policy.grid
    elif grid != policy.grid:
        raise ValueError("policy must live on the solver grid")
    m, worst = _kfe_rk4_forward(
        spec.u, policy.pi.values, policy.delta, grid.h, POSITIVITY_SLACK)
    if worst < -POSITIVITY_SLACK:
        raise SolverError(
            f"occupancy went negative ({worst:.3e}); reduce the grid step",
            residual=worst)
    w = m[:, :, None] * policy.pi.values
    idx = np.arange(spec.K)
    w[:, idx, idx] = 0.0
    np.maximum(w, 0.0, out=w)
    return OccupationFlux(m=GridFunction(grid, m), w=GridFunction(grid, w))


def aggregate_progress(flux):
    """Aggregate progress induced by an occupancy: rho = 1 - sum_k m_k."""
    return AggregateProgress(flux.grid, 1.0 - flux.mass())


@njit(cache=True)
def _logistic_rk4(theta, h):
    """RK4 for rho' = theta(t) (1 - rho), rho(0) = 0, theta linear in t
    between nodes."""
    n = theta.shape[0] - 1
    rho = np.empty(n + 1)
    rho[0] = 0.0
    for i in range(n):
        th0 = theta[i]
        th1 = theta[i + 1]
        thm = 0.5 * (th0 + th1)
        r = rho[i]
        k1 = th0 * (1.0 - r)
        k2 = thm * (1.0 - (r + 0.5 * h * k1))
        k3 = thm * (1.0 - (r + 0.5 * h * k2))
        k4 = th1 * (1.0 - (r + h * k3))
        rho[i + 1] = r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rho


def consistency_rho(theta_bar, spec=None):
    """Aggregate regenerated by an average-effort profile.

    Solves rho' = theta_bar(t) (1 - rho), rho(0) = 0.  When a model is
    given, theta_bar must stay inside [u_min, u_max] (up to a 1-ulp slack
    for empirical averages).
    """
    theta = theta_bar.values
    if theta.ndim != 1:
        raise ValueError("average effort must be scalar valued")
    if spec is not None:
        tol = 1e-12 * max(1.0, spec.u_max)
        if np.any(theta < spec.u_min - tol) or np.any(theta > spec.u_max + tol):
            raise ValueError(
                "average effort leaves [u_min, u_max]: "
                f"range [{theta.min():.6g}, {theta.max():.6g}] vs "
                f"[{spec.u_min:.6g}, {spec.u_max:.6g}]")
        theta = np.clip(theta, spec.u_min, spec.u_max)
    rho = _logistic_rk4(np.ascontiguousarray(theta), theta_bar.grid.h)
    np.minimum(rho, 1.0, out=rho)
    return AggregateProgress(theta_bar.grid, rho)
