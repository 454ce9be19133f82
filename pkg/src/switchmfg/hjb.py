"""Backward solver for the entropy-regularized value system.

The value of occupying regime k at time t, facing an exogenous aggregate
progress rho, solves the coupled backward ODE system

    dV_k/dt + u_k (R(rho(t)) - V_k) - c(u_k)
            + eta * sum_{j != k} exp((V_j - V_k - g_{kj}) / eta) = 0,

with the optimal randomized switching rates in Gibbs feedback form and a
softmax initial law over regimes.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import GibbsOverflowError, SolverError
from .model import GridFunction, _force_unit_sum, _readonly

# hard guard on Gibbs exponents: beyond this exp() overflows double precision
EXP_GUARD = 700.0


@dataclass(frozen=True)
class ValueFunction:
    """Per-regime value trajectories; eta > 0 regularized, eta == 0 marks
    output of the obstacle-scheme solver."""

    values_fn: GridFunction
    eta: float

    @property
    def values(self):
        return self.values_fn.values

    @property
    def grid(self):
        return self.values_fn.grid

    @property
    def K(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class Policy:
    """Randomized switching control: time-dependent generator plus initial law.

    pi.values[t, k, j] is the k->j switching rate; diagonals complete each
    row to zero.  delta is the initial distribution over regimes.
    """

    pi: GridFunction
    delta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "delta", _readonly(self.delta))
        K = self.delta.shape[0]
        if self.pi.values.ndim != 3 or self.pi.values.shape[1:] != (K, K):
            raise ValueError("pi must be (n+1, K, K) matching delta")
        if np.any(self.delta < 0.0) or abs(self.delta.sum() - 1.0) > 1e-9:
            raise ValueError("delta must be a probability vector")
        off = self.pi.values.copy()
        off[:, np.arange(K), np.arange(K)] = 0.0
        if np.any(off < 0.0):
            raise ValueError("off-diagonal switching rates must be >= 0")

    @property
    def grid(self):
        return self.pi.grid

    @property
    def K(self):
        return self.delta.shape[0]


def generator_row_sums(pi_values):
    """Row sums evaluated as (off-diagonal sum) + diagonal.

    The diagonal is stored as the negated off-diagonal sum, so this
    two-term cancellation is exact in floating point.
    """
    K = pi_values.shape[-1]
    idx = np.arange(K)
    off = np.array(pi_values)
    diag = off[..., idx, idx].copy()
    off[..., idx, idx] = 0.0
    return off.sum(axis=-1) + diag


def value_bounds(spec, eta):
    """Constant sub/supersolution sandwich for the regularized system."""
    r0 = float(spec.reward(0.0))
    lo = -float(np.max(spec.c)) / spec.u_min
    if spec.K > 1:
        off = ~np.eye(spec.K, dtype=bool)
        gain = float(np.max(np.exp(-spec.g[off] / eta)))
    else:
        gain = 0.0
    hi = r0 + eta * spec.K * gain / spec.u_min
    return lo, hi


def _coupling(v, g, eta):
    """sum_{j != k} exp((v_j - v_k - g_kj)/eta) per regime, with guard."""
    x = (v[None, :] - v[:, None] - g) / eta
    np.fill_diagonal(x, -np.inf)
    mx = float(np.max(x)) if x.size else -np.inf
    if mx > EXP_GUARD:
        raise GibbsOverflowError(
            f"Gibbs exponent {mx:.1f} exceeds the overflow guard; "
            "increase eta or rescale the switching costs")
    return np.exp(x).sum(axis=1), mx


def stationary_value(spec, eta, tol=1e-12, max_iters=100_000):
    """Value vector of the fully-arrived population (aggregate pinned at 1).

    Damped fixed-point iteration on
        V_k = R(1) - c_k/u_k + (eta/u_k) * coupling_k(V).
    The damping starts at 0.5 and is halved whenever the residual stops
    contracting; the fixed point is unique and locally attracting for a
    small enough damping factor.
    """
    if eta <= 0.0:
        raise ValueError("stationary_value needs eta > 0")
    r1 = float(spec.reward(1.0))
    base = r1 - spec.c / spec.u
    v = base.copy()
    damping = 0.5
    best_res = np.inf
    best_v = v.copy()
    stall = 0
    res = np.inf
    for _ in range(max_iters):
        coup, _ = _coupling(v, spec.g, eta)
        residual = spec.u * (r1 - v) - spec.c + eta * coup
        res = float(np.max(np.abs(residual)))
        if res <= tol:
            return _readonly(v)
        if res < best_res:
            best_res, best_v, stall = res, v.copy(), 0
        else:
            stall += 1
        if not np.isfinite(res) or res > 10.0 * best_res or stall > 200:
            damping *= 0.5
            v = best_v.copy()
            stall = 0
            if damping < 1e-8:
                raise SolverError(
                    "stationary value iteration stalled", residual=best_res)
            continue
        v = (1.0 - damping) * v + damping * (base + (eta / spec.u) * coup)
    raise SolverError(
        f"stationary value iteration hit the cap ({max_iters})", residual=res)


@njit(cache=True)
def _hjb_rhs(u, c, g, eta, r_t, v, out):
    """dV/dt at one time; returns the largest Gibbs exponent encountered."""
    K = u.shape[0]
    max_x = -np.inf
    for k in range(K):
        coup = 0.0
        for j in range(K):
            if j == k:
                continue
            x = (v[j] - v[k] - g[k, j]) / eta
            if x > max_x:
                max_x = x
            coup += np.exp(x)
        out[k] = -u[k] * (r_t - v[k]) + c[k] - eta * coup
    return max_x


@njit(cache=True)
def _hjb_rk4_backward(u, c, g, eta, r_nodes, r_mid, h, v_terminal):
    """Classical RK4 sweep from t=T down to t=0.

    r_nodes/r_mid hold R(rho) at the grid nodes and midpoints (rho is
    interpolated linearly before applying R).  Returns (V, flag, info):
    flag 0 ok, 1 overflow guard tripped, 2 non-finite state; info carries
    the offending exponent or node index.
    """
    n = r_nodes.shape[0] - 1
    K = u.shape[0]
    V = np.empty((n + 1, K))
    V[n] = v_terminal
    k1 = np.empty(K)
    k2 = np.empty(K)
    k3 = np.empty(K)
    k4 = np.empty(K)
    tmp = np.empty(K)
    half = 0.5 * h
    for i in range(n, 0, -1):
        v = V[i]
        mx = _hjb_rhs(u, c, g, eta, r_nodes[i], v, k1)
        for k in range(K):
            tmp[k] = v[k] - half * k1[k]
        mx = max(mx, _hjb_rhs(u, c, g, eta, r_mid[i - 1], tmp, k2))
        for k in range(K):
            tmp[k] = v[k] - half * k2[k]
        mx = max(mx, _hjb_rhs(u, c, g, eta, r_mid[i - 1], tmp, k3))
        for k in range(K):
            tmp[k] = v[k] - h * k3[k]
        mx = max(mx, _hjb_rhs(u, c, g, eta, r_nodes[i - 1], tmp, k4))
        if mx > 700.0:
            return V, 1, mx
        ok = True
        for k in range(K):
            V[i - 1, k] = v[k] - (h / 6.0) * (
                k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
            if not np.isfinite(V[i - 1, k]):
                ok = False
        if not ok:
            return V, 2, float(i - 1)
    return V, 0, 0.0


def solve_hjb_backward(spec, eta, rho, grid=None):
    """Integrate the regularized value system backward along an aggregate.

    Terminal condition: the stationary value at aggregate 1; exponential
    dissipativity at rate >= u_min makes the truncation error negligible
    for horizons chosen by TimeGrid.for_model.
    """
    if eta <= 0.0:
        raise ValueError("solve_hjb_backward needs eta > 0")
    if grid is None:
        grid = rho.grid
    elif grid != rho.grid:
        raise ValueError("rho must live on the solver grid")
    r_nodes = np.asarray(spec.reward(rho.values), dtype=float)
    r_mid = np.asarray(spec.reward(rho.midpoint_values()), dtype=float)
    v_term = stationary_value(spec, eta)
    V, flag, info = _hjb_rk4_backward(
        spec.u, spec.c, spec.g, eta, r_nodes, r_mid, grid.h, v_term)
    if flag == 1:
        raise GibbsOverflowError(
            f"Gibbs exponent {info:.1f} exceeds the overflow guard; "
            "increase eta or rescale the switching costs")
    if flag == 2:
        raise SolverError(
            f"non-finite value at node {int(info)} during backward sweep")
    return ValueFunction(GridFunction(grid, V), eta)


def best_response_generator(value, spec, eta):
    """Gibbs feedback rates pi_kj(t) = exp((V_j - V_k - g_kj)/eta).

    Returns the full generator as a grid function: off-diagonals per the
    Gibbs formula, diagonals completing every row sum to zero.
    """
    if eta <= 0.0:
        raise ValueError("best_response_generator needs eta > 0")
    V = value.values
    K = V.shape[1]
    x = (V[:, None, :] - V[:, :, None] - spec.g[None, :, :]) / eta
    idx = np.arange(K)
    x[:, idx, idx] = -np.inf
    if K > 1:
        mx = float(np.max(x))
        if mx > EXP_GUARD:
            raise GibbsOverflowError(
                f"Gibbs exponent {mx:.1f} exceeds the overflow guard; "
                "increase eta or rescale the switching costs")
    pi = np.exp(x)
    pi[:, idx, idx] = 0.0
    pi[:, idx, idx] = -pi.sum(axis=2)
    return GridFunction(value.grid, pi)


def softmax_initial(v0, eta):
    """Softmax distribution over V(0)/eta, overflow-safe via max subtraction.

    The largest weight is nudged so the probabilities sum to one exactly;
    downstream mass accounting then starts from an exact unit total.
    """
    if eta <= 0.0:
        raise ValueError("softmax_initial needs eta > 0")
    v0 = np.asarray(v0, dtype=float)
    z = (v0 - np.max(v0)) / eta
    p = np.exp(z)
    p /= p.sum()
    return _readonly(_force_unit_sum(p))


def gibbs_policy(value, spec, eta):
    """Bundle the Gibbs generator with its softmax initial law."""
    pi = best_response_generator(value, spec, eta)
    delta = softmax_initial(value.values[0], eta)
    return Policy(pi=pi, delta=delta)
