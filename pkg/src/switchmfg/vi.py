"""Obstacle scheme for the unregularized switching value system.

Backward time stepping alternates an explicit continuation step for each
regime with a projection onto the switching obstacle

    V_k >= max_{j != k} (V_j - g_kj),

which is the monotone-scheme discretization of the variational inequality

    min{ -V_k' - u_k (R(rho) - V_k) + c(u_k),
         V_k - max_{j != k} (V_j - g_kj) } = 0.

Under the strict triangle inequality a single projection pass per step
suffices: chaining two switches can never beat the direct one.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError
from .hjb import ValueFunction
from .model import GridFunction


@njit(cache=True)
def _obstacle_project(v, g):
    K = v.shape[0]
    out = np.empty(K)
    for k in range(K):
        best = v[k]
        for j in range(K):
            if j == k:
                continue
            cand = v[j] - g[k, j]
            if cand > best:
                best = cand
        out[k] = best
    return out


@njit(cache=True)
def _vi_backward(u, c, g, r_nodes, h, v_terminal):
    n = r_nodes.shape[0] - 1
    K = u.shape[0]
    V = np.empty((n + 1, K))
    V[n] = _obstacle_project(v_terminal, g)
    cont = np.empty(K)
    for i in range(n - 1, -1, -1):
        for k in range(K):
            cont[k] = V[i + 1, k] + h * (
                u[k] * (r_nodes[i + 1] - V[i + 1, k]) - c[k])
        V[i] = _obstacle_project(cont, g)
    return V


def solve_hjbvi(spec, rho, grid=None):
    """Backward obstacle scheme along an aggregate; eta = 0 marks the output.

    Terminal condition: the no-switch stationary value R(1) - c_k/u_k per
    regime, reconciled across regimes by one obstacle projection.
    Monotonicity of the explicit step requires h < 1/u_max.
    """
    if grid is None:
        grid = rho.grid
    elif grid != rho.grid:
        raise ValueError("rho must live on the solver grid")
    if grid.h * spec.u_max >= 1.0:
        raise ConfigError(
            f"step restriction violated: h = {grid.h} needs h < 1/u_max = "
            f"{1.0 / spec.u_max}")
    r_nodes = np.asarray(spec.reward(rho.values), dtype=float)
    v_term = float(spec.reward(1.0)) - spec.c / spec.u
    V = _vi_backward(spec.u, spec.c, spec.g, r_nodes, grid.h, v_term)
    return ValueFunction(GridFunction(grid, V), eta=0.0)


@dataclass(frozen=True)
class ViscosityResidual:
    """Both branches of the variational inequality evaluated on the grid.

    ode_branch uses centered differences in the interior and second-order
    one-sided differences at the endpoints; obstacle_branch is +inf for a
    single regime (no switching available).  Nothing is clipped.
    """

    ode_branch: np.ndarray
    obstacle_branch: np.ndarray
    min_branch: np.ndarray

    @property
    def sup_min_branch(self):
        return float(np.max(np.abs(self.min_branch)))

    @property
    def min_obstacle(self):
        return float(np.min(self.obstacle_branch))


def viscosity_residual(value, spec, rho):
    """Pointwise residuals of a candidate value against the inequality."""
    V = value.values
    h = value.grid.h
    n = V.shape[0] - 1
    K = V.shape[1]

    dV = np.empty_like(V)
    dV[1:-1] = (V[2:] - V[:-2]) / (2.0 * h)
    dV[0] = (-3.0 * V[0] + 4.0 * V[1] - V[2]) / (2.0 * h)
    dV[-1] = (3.0 * V[-1] - 4.0 * V[-2] + V[-3]) / (2.0 * h)

    r = np.asarray(spec.reward(rho.values), dtype=float)[:, None]
    ode = -dV - spec.u[None, :] * (r - V) + spec.c[None, :]

    if K == 1:
        obstacle = np.full((n + 1, 1), np.inf)
    else:
        best = np.full((n + 1, K), -np.inf)
        for k in range(K):
            for j in range(K):
                if j == k:
                    continue
                np.maximum(best[:, k], V[:, j] - spec.g[k, j], out=best[:, k])
        obstacle = V - best

    return ViscosityResidual(ode_branch=ode, obstacle_branch=obstacle,
                             min_branch=np.minimum(ode, obstacle))
