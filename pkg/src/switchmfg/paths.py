"""Pure switching strategies: payoffs, a brute-force oracle, and the
discounted value-evolution functional.

A pure strategy is a cadlag piecewise-constant regime path encoded by its
switch times sigma and regime indices kappa.  Its payoff against an
aggregate rho is

    J = int_0^inf e^{-int_0^s theta} [theta R(rho) - c(theta)] ds
        - sum_n e^{-int_0^{sigma_n} theta} g_{kappa_{n-1}, kappa_n},

discretized by segment-wise trapezoid quadrature with exact discount
factors at the switch times.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError
from .model import GridFunction, _readonly

BRUTE_FORCE_BUDGET = 10_000_000


@dataclass(frozen=True)
class SwitchingPath:
    """Finite double sequence of switch times and regime indices (0-based)."""

    sigma: np.ndarray
    kappa: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma", _readonly(self.sigma))
        object.__setattr__(self, "kappa", _readonly(self.kappa, dtype=np.int64))
        if self.sigma.shape != self.kappa.shape or self.sigma.ndim != 1:
            raise ValueError("sigma and kappa must be 1-d of equal length")
        if self.sigma.shape[0] < 1 or self.sigma[0] != 0.0:
            raise ValueError("paths start at time 0")
        if np.any(np.diff(self.sigma) <= 0.0):
            raise ValueError("switch times must be strictly increasing")
        if np.any(np.diff(self.kappa) == 0):
            raise ValueError("consecutive regimes must differ")

    @classmethod
    def constant(cls, regime):
        return cls(sigma=np.zeros(1), kappa=np.array([regime]))

    @property
    def n_switches(self):
        return self.sigma.shape[0] - 1

    def regime_at(self, t):
        """Right-continuous regime lookup."""
        idx = np.searchsorted(self.sigma, t, side="right") - 1
        return self.kappa[np.maximum(idx, 0)]

    def effort_at(self, t, spec):
        return spec.u[self.regime_at(t)]


def _interior_nodes(a, b, h, n):
    """Grid nodes strictly inside (a, b)."""
    i0 = int(np.ceil(a / h))
    if i0 * h <= a:
        i0 += 1
    i1 = int(np.ceil(b / h))
    i1 = min(i1, n + 1)
    if i0 >= i1:
        return np.empty(0)
    return np.arange(i0, i1) * h


def pure_payoff(path, rho, spec, with_tail=False):
    """Payoff of a pure switching strategy against an aggregate.

    Quadrature runs over [0, T]; the ignored tail is bounded by
    e^{-Theta(T)} (R(rho(T)) + max_k c_k / u_min) and returned alongside
    the value when with_tail is set.
    """
    grid = rho.grid
    T = grid.horizon
    if path.sigma[-1] >= T:
        raise ValueError("switch times must lie strictly inside the horizon")
    ends = np.append(path.sigma[1:], T)
    total = 0.0
    theta_acc = 0.0
    switch_cost = 0.0
    for seg in range(path.sigma.shape[0]):
        a = float(path.sigma[seg])
        b = float(ends[seg])
        k = int(path.kappa[seg])
        pts = np.concatenate(([a], _interior_nodes(a, b, grid.h, grid.n_steps), [b]))
        disc = np.exp(-(theta_acc + spec.u[k] * (pts - a)))
        f = disc * (spec.u[k] * np.asarray(spec.reward(rho.at(pts))) - spec.c[k])
        total += float(np.trapezoid(f, pts))
        theta_acc += spec.u[k] * (b - a)
        if seg + 1 < path.sigma.shape[0]:
            switch_cost += float(np.exp(-theta_acc)
                                 * spec.g[k, path.kappa[seg + 1]])
    value = total - switch_cost
    if not with_tail:
        return value
    tail = float(np.exp(-theta_acc)
                 * (spec.reward(rho.values[-1]) + np.max(spec.c) / spec.u_min))
    return value, tail


@njit(cache=True)
def _value_togo(u, c, r_nodes, h):
    """B[i,k] = int_{t_i}^{T} e^{-u_k (s - t_i)} (u_k R(rho(s)) - c_k) ds,
    per-step trapezoid, backward recursion (all factors <= 1: stable)."""
    n = r_nodes.shape[0] - 1
    K = u.shape[0]
    B = np.zeros((n + 1, K))
    for k in range(K):
        decay = np.exp(-u[k] * h)
        for i in range(n - 1, -1, -1):
            f0 = u[k] * r_nodes[i] - c[k]
            f1 = u[k] * r_nodes[i + 1] - c[k]
            B[i, k] = decay * B[i + 1, k] + 0.5 * h * (f0 + decay * f1)
    return B


def regime_value_togo(spec, rho):
    """No-switch value-to-go per regime on the grid nodes."""
    r_nodes = np.asarray(spec.reward(rho.values), dtype=float)
    return _value_togo(spec.u, spec.c, r_nodes, rho.grid.h)


@njit(cache=True)
def _best_over_times(B, E, gidx, tc, seq, g, n_sw):
    """Maximize the decomposed payoff over coarse switch-time combinations
    for one fixed regime sequence.  E[k, m] = exp(-u_k * tc[m])."""
    M = tc.shape[0]
    best = -np.inf
    b0 = -1
    b1 = -1
    b2 = -1
    k0 = seq[0]
    if n_sw == 0:
        return B[0, k0], b0, b1, b2
    if n_sw == 1:
        k1 = seq[1]
        for a in range(M):
            Ea = E[k0, a]
            J = B[0, k0] - Ea * B[gidx[a], k0] + Ea * (
                -g[k0, k1] + B[gidx[a], k1])
            if J > best:
                best = J
                b0 = a
        return best, b0, b1, b2
    if n_sw == 2:
        k1 = seq[1]
        k2 = seq[2]
        for a in range(M):
            Ea = E[k0, a]
            head = B[0, k0] - Ea * B[gidx[a], k0] + Ea * (
                -g[k0, k1] + B[gidx[a], k1])
            for b in range(a + 1, M):
                Eab = E[k1, b] / E[k1, a]
                D = Ea * Eab
                J = head - D * B[gidx[b], k1] + D * (
                    -g[k1, k2] + B[gidx[b], k2])
                if J > best:
                    best = J
                    b0 = a
                    b1 = b
        return best, b0, b1, b2
    k1 = seq[1]
    k2 = seq[2]
    k3 = seq[3]
    for a in range(M):
        Ea = E[k0, a]
        head = B[0, k0] - Ea * B[gidx[a], k0] + Ea * (
            -g[k0, k1] + B[gidx[a], k1])
        for b in range(a + 1, M):
            Eab = E[k1, b] / E[k1, a]
            D2 = Ea * Eab
            head2 = head - D2 * B[gidx[b], k1] + D2 * (
                -g[k1, k2] + B[gidx[b], k2])
            for cc in range(b + 1, M):
                Ebc = E[k2, cc] / E[k2, b]
                D3 = D2 * Ebc
                J = head2 - D3 * B[gidx[cc], k2] + D3 * (
                    -g[k2, k3] + B[gidx[cc], k3])
                if J > best:
                    best = J
                    b0 = a
                    b1 = b
                    b2 = cc
    return best, b0, b1, b2


def _sequences(K, n_switches):
    seqs = [[k] for k in range(K)]
    for _ in range(n_switches):
        seqs = [s + [j] for s in seqs for j in range(K) if j != s[-1]]
    return seqs


def brute_force_best_response(spec, rho, max_switches=2, switch_grid_stride=100):
    """Exhaustive search over pure strategies with few, coarse switch times.

    Independent of the value solvers: payoffs come from the quadrature
    decomposition over no-switch value-to-go arrays.  Returns the argmax
    path and its pure_payoff.
    """
    if max_switches > 3:
        raise ConfigError("combinatorial budget: max_switches <= 3")
    grid = rho.grid
    gidx = np.arange(switch_grid_stride, grid.n_steps, switch_grid_stride,
                     dtype=np.int64)
    M = gidx.shape[0]
    n_candidates = 0
    for s in range(max_switches + 1):
        n_seq = spec.K * (spec.K - 1) ** s
        n_comb = 1
        for i in range(s):
            n_comb = n_comb * (M - i) // (i + 1)
        n_candidates += n_seq * n_comb
    if n_candidates > BRUTE_FORCE_BUDGET:
        raise ConfigError(
            f"brute force budget exceeded: {n_candidates} candidates "
            f"(> {BRUTE_FORCE_BUDGET}); raise the stride or cut switches")

    B = regime_value_togo(spec, rho)
    tc = gidx * grid.h
    E = np.exp(-spec.u[:, None] * tc[None, :])
    best_payoff = -np.inf
    best_path = None
    for s in range(max_switches + 1):
        for seq in _sequences(spec.K, s):
            seq_arr = np.asarray(seq, dtype=np.int64)
            val, b0, b1, b2 = _best_over_times(
                B, E, gidx, tc, seq_arr, spec.g, s)
            if val > best_payoff:
                best_payoff = val
                picks = [b for b in (b0, b1, b2) if b >= 0][:s]
                sigma = np.concatenate(([0.0], tc[picks]))
                best_path = SwitchingPath(sigma=sigma, kappa=seq_arr)
    return best_path, pure_payoff(best_path, rho, spec)


@njit(cache=True)
def _value_evolution_nodes(sig, kap, V, r_nodes, u, c, g, h, decay, out):
    """Y at every grid node along one path.

    Discounts accumulate multiplicatively (one exp per regime per step
    size, precomputed in `decay`); switch times inside a step insert
    trapezoid breakpoints and exact discount factors.
    """
    n = r_nodes.shape[0] - 1
    nseg = sig.shape[0]
    seg = 0
    k = kap[0]
    D = 1.0
    I = 0.0
    G = 0.0
    out[0] = V[0, k]
    for i in range(n):
        t1 = (i + 1) * h
        a = i * h
        ra = r_nodes[i]
        fa = D * (u[k] * ra - c[k])
        while seg + 1 < nseg and sig[seg + 1] <= t1:
            s = sig[seg + 1]
            pos = s / h
            j = int(pos)
            if j > n - 1:
                j = n - 1
            frac = pos - j
            rs = r_nodes[j] + frac * (r_nodes[j + 1] - r_nodes[j])
            Db = D * np.exp(-u[k] * (s - a))
            fb = Db * (u[k] * rs - c[k])
            I += 0.5 * (fa + fb) * (s - a)
            D = Db
            knew = kap[seg + 1]
            G += D * g[k, knew]
            k = knew
            seg += 1
            a = s
            fa = D * (u[k] * rs - c[k])
        if a == i * h:
            Db = D * decay[k]
        else:
            Db = D * np.exp(-u[k] * (t1 - a))
        fb = Db * (u[k] * r_nodes[i + 1] - c[k])
        I += 0.5 * (fa + fb) * (t1 - a)
        D = Db
        out[i + 1] = V[i + 1, k] * D + I - G
    return 0


def value_evolution(path, value, rho, spec):
    """Discounted value evolution along a pure path, at every grid node.

    Non-increasing in exact arithmetic for any path; constant exactly on
    best responses.
    """
    grid = value.grid
    if grid != rho.grid:
        raise ValueError("value and rho must share a grid")
    r_nodes = np.asarray(spec.reward(rho.values), dtype=float)
    decay = np.exp(-spec.u * grid.h)
    out = np.empty(grid.n_steps + 1)
    _value_evolution_nodes(path.sigma, path.kappa, value.values, r_nodes,
                           spec.u, spec.c, spec.g, grid.h, decay, out)
    return GridFunction(grid, out)


def monotonicity_defect(y):
    """Largest positive increment of a value-evolution trajectory."""
    d = np.diff(y.values if isinstance(y, GridFunction) else y)
    return float(max(0.0, d.max())) if d.size else 0.0


@njit(cache=True)
def _value_evolution_stats(sig_flat, kap_flat, offsets, V, r_nodes, u, c, g,
                           h, decay, target, sup_dev, max_inc):
    """Per-path sup |Y - target| and largest positive Y increment, without
    materializing the trajectories."""
    n = r_nodes.shape[0] - 1
    for p in range(offsets.shape[0] - 1):
        lo = offsets[p]
        hi = offsets[p + 1]
        seg = lo
        k = kap_flat[lo]
        D = 1.0
        I = 0.0
        G = 0.0
        y_prev = V[0, k]
        dev = abs(y_prev - target)
        inc = 0.0
        for i in range(n):
            t1 = (i + 1) * h
            a = i * h
            fa = D * (u[k] * r_nodes[i] - c[k])
            while seg + 1 < hi and sig_flat[seg + 1] <= t1:
                s = sig_flat[seg + 1]
                pos = s / h
                j = int(pos)
                if j > n - 1:
                    j = n - 1
                frac = pos - j
                rs = r_nodes[j] + frac * (r_nodes[j + 1] - r_nodes[j])
                Db = D * np.exp(-u[k] * (s - a))
                fb = Db * (u[k] * rs - c[k])
                I += 0.5 * (fa + fb) * (s - a)
                D = Db
                knew = kap_flat[seg + 1]
                G += D * g[k, knew]
                k = knew
                seg += 1
                a = s
                fa = D * (u[k] * rs - c[k])
            if a == i * h:
                Db = D * decay[k]
            else:
                Db = D * np.exp(-u[k] * (t1 - a))
            fb = Db * (u[k] * r_nodes[i + 1] - c[k])
            I += 0.5 * (fa + fb) * (t1 - a)
            D = Db
            y = V[i + 1, k] * D + I - G
            if y - y_prev > inc:
                inc = y - y_prev
            d = abs(y - target)
            if d > dev:
                dev = d
            y_prev = y
        sup_dev[p] = dev
        max_inc[p] = inc


def value_evolution_stats(paths, value, rho, spec, target):
    """Batch per-path statistics of the value-evolution functional."""
    grid = value.grid
    r_nodes = np.asarray(spec.reward(rho.values), dtype=float)
    decay = np.exp(-spec.u * grid.h)
    offsets = np.zeros(len(paths) + 1, dtype=np.int64)
    for i, p in enumerate(paths):
        offsets[i + 1] = offsets[i] + p.sigma.shape[0]
    sig_flat = np.concatenate([p.sigma for p in paths]) if paths else np.zeros(0)
    kap_flat = (np.concatenate([p.kappa for p in paths]) if paths
                else np.zeros(0, dtype=np.int64))
    sup_dev = np.empty(len(paths))
    max_inc = np.empty(len(paths))
    _value_evolution_stats(sig_flat, kap_flat, offsets, value.values, r_nodes,
                           spec.u, spec.c, spec.g, grid.h, decay,
                           float(target), sup_dev, max_inc)
    return sup_dev, max_inc
