"""Game instances, reward schemes, and time-grid primitives.

A game instance couples K effort regimes (Poisson intensities u_k > 0),
running costs c_k, pairwise switching costs g_{kj}, and a decreasing reward
scheme R on [0, 1] paid according to the population fraction that has
already arrived.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_STEP = 1e-3
DEFAULT_TAIL_TOL = 1e-8

# slack for membership checks on numerically produced aggregates; RK4 is not
# exactly monotonicity/positivity preserving
PROGRESS_ATOL = 1e-9


def _readonly(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def _force_unit_sum(p):
    """Nudge the largest entry of a near-unit-sum vector so the sum is
    exactly 1.0; removes pure roundoff from probability vectors."""
    for _ in range(5):
        s = p.sum()
        if s == 1.0:
            break
        p[np.argmax(p)] -= s - 1.0
    return p


# ---------------------------------------------------------------------------
# reward schemes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RewardScheme:
    """Rank reward R: [0,1] -> [0, inf), decreasing and Lipschitz.

    Three concrete families:
      linear  R(x) = a - b*x
      power   R(x) = a*(1-x)**p, p >= 1
      table   decreasing piecewise-linear interpolation of (x, y) knots
    """

    family: str
    params: dict

    @classmethod
    def linear(cls, a, b):
        return cls("linear", {"a": float(a), "b": float(b)})

    @classmethod
    def power(cls, a, p):
        return cls("power", {"a": float(a), "p": float(p)})

    @classmethod
    def table(cls, x, y):
        return cls("table", {"x": _readonly(x), "y": _readonly(y)})

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "linear":
            out = self.params["a"] - self.params["b"] * x
        elif self.family == "power":
            out = self.params["a"] * (1.0 - x) ** self.params["p"]
        elif self.family == "table":
            out = np.interp(x, self.params["x"], self.params["y"])
        else:
            raise ValueError(f"unknown reward family {self.family!r}")
        return out if out.ndim else float(out)

    @property
    def lipschitz(self):
        """Bound r with |R(x)-R(y)| <= r|x-y| on [0,1]."""
        if self.family == "linear":
            return abs(self.params["b"])
        if self.family == "power":
            # |R'| = a*p*(1-x)^(p-1) is maximal at x=0 for p >= 1
            return abs(self.params["a"] * self.params["p"])
        dx = np.diff(self.params["x"])
        dy = np.diff(self.params["y"])
        return float(np.max(np.abs(dy / dx)))

    @property
    def is_convex(self):
        if self.family == "linear":
            return True
        if self.family == "power":
            return self.params["p"] >= 1.0
        slopes = np.diff(self.params["y"]) / np.diff(self.params["x"])
        return bool(np.all(np.diff(slopes) >= 0.0))

    @property
    def is_strictly_convex(self):
        if self.family == "power":
            return self.params["p"] > 1.0 and self.params["a"] > 0.0
        return False


def reward_eval(reward, x):
    """Evaluate a reward scheme at population fraction(s) x in [0,1]."""
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0.0) or np.any(xs > 1.0):
        raise ValueError("reward argument outside [0, 1]")
    return reward(x)


# ---------------------------------------------------------------------------
# model instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """A complete game instance; immutable after construction."""

    u: np.ndarray          # effort intensities, shape (K,)
    c: np.ndarray          # running costs, shape (K,)
    g: np.ndarray          # switching costs, shape (K, K)
    reward: RewardScheme

    def __post_init__(self):
        object.__setattr__(self, "u", _readonly(self.u))
        object.__setattr__(self, "c", _readonly(self.c))
        object.__setattr__(self, "g", _readonly(self.g))
        if self.u.ndim != 1 or self.c.shape != self.u.shape:
            raise ValueError("u and c must be 1-d arrays of equal length")
        if self.g.shape != (self.K, self.K):
            raise ValueError("g must be a KxK matrix")

    @property
    def K(self):
        return self.u.shape[0]

    @property
    def u_min(self):
        return float(np.min(self.u))

    @property
    def u_max(self):
        return float(np.max(self.u))


@dataclass(frozen=True)
class ValidationFailure:
    check: str
    indices: tuple      # 1-based regime labels, matching the g_{j,k} notation
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    failures: tuple

    def failed_checks(self):
        return sorted({f.check for f in self.failures})

    def __str__(self):
        if self.ok:
            return "model: pass"
        lines = ["model: FAIL"]
        lines += [f"  [{f.check}] {f.message}" for f in self.failures]
        return "\n".join(lines)


def validate_model(spec):
    """Check every model invariant; diagnostics only, never raises."""
    fails = []

    def fail(check, indices, message):
        fails.append(ValidationFailure(check, tuple(indices), message))

    for k in range(spec.K):
        if not spec.u[k] > 0.0:
            fail("positive-efforts", (k + 1,),
                 f"effort u_{k + 1} = {spec.u[k]} must be > 0 "
                 "(zero effort is not an admissible regime)")
        if spec.c[k] < 0.0:
            fail("nonnegative-costs", (k + 1,),
                 f"running cost c_{k + 1} = {spec.c[k]} must be >= 0")

    for j in range(spec.K):
        if spec.g[j, j] != 0.0:
            fail("zero-diagonal", (j + 1,),
                 f"g_{j + 1},{j + 1} = {spec.g[j, j]} must be 0")
        for k in range(spec.K):
            if j != k and not spec.g[j, k] > 0.0:
                fail("positive-switching-costs", (j + 1, k + 1),
                     f"g_{j + 1},{k + 1} = {spec.g[j, k]} must be > 0")

    # strict triangle inequality: chaining two switches must cost strictly
    # more than switching directly
    for j in range(spec.K):
        for k in range(spec.K):
            for l in range(spec.K):
                if j == k or k == l or j == l:
                    continue
                if not spec.g[j, k] + spec.g[k, l] > spec.g[j, l]:
                    fail("strict-triangle", (j + 1, k + 1, l + 1),
                         f"g_{j + 1},{k + 1} + g_{k + 1},{l + 1} = "
                         f"{spec.g[j, k] + spec.g[k, l]} does not exceed "
                         f"g_{j + 1},{l + 1} = {spec.g[j, l]}")

    xs = np.linspace(0.0, 1.0, 1001)
    if spec.reward.family == "table":
        xs = np.union1d(xs, spec.reward.params["x"])
    rs = spec.reward(xs)
    if np.any(rs < 0.0):
        i = int(np.argmax(rs < 0.0))
        fail("reward-nonnegative", (), f"R({xs[i]:.4g}) = {rs[i]:.4g} < 0")
    if np.any(np.diff(rs) > 0.0):
        i = int(np.argmax(np.diff(rs) > 0.0))
        fail("reward-decreasing", (),
             f"R increases on [{xs[i]:.4g}, {xs[i + 1]:.4g}]")
    if not np.isfinite(spec.reward.lipschitz):
        fail("reward-lipschitz", (), "Lipschitz bound is not finite")

    return ValidationReport(ok=not fails, failures=tuple(fails))


# ---------------------------------------------------------------------------
# time grids and grid functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] shared by every solver in a run."""

    h: float
    n_steps: int
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.h <= 0.0 or self.n_steps < 1:
            raise ValueError("need h > 0 and n_steps >= 1")

    @property
    def horizon(self):
        return self.h * self.n_steps

    @cached_property
    def nodes(self):
        return _readonly(np.arange(self.n_steps + 1) * self.h)

    @classmethod
    def for_model(cls, spec, h=DEFAULT_STEP, tail_tol=DEFAULT_TAIL_TOL):
        """Horizon long enough that the surviving mass is below tail_tol.

        The surviving fraction decays at least like exp(-u_min*t), so
        T >= log(1/tail_tol)/u_min truncates with error <= tail_tol.
        """
        t_req = np.log(1.0 / tail_tol) / spec.u_min
        return cls(h=h, n_steps=int(np.ceil(t_req / h)), tail_tol=tail_tol)


@dataclass(frozen=True)
class GridFunction:
    """Values sampled on grid nodes; linear interpolation between nodes.

    values has leading dimension n_steps+1 and is scalar, K-vector, or
    KxK-matrix valued per node.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if not (isinstance(v, np.ndarray) and v.dtype == np.float64
                and not v.flags.writeable):
            v = _readonly(v)
        object.__setattr__(self, "values", v)
        if v.shape[0] != self.grid.n_steps + 1:
            raise ValueError("leading dimension must match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite entries")

    def at(self, t):
        """Linear interpolation at time(s) t, clamped to [0, T]."""
        t = np.asarray(t, dtype=float)
        pos = np.clip(t / self.grid.h, 0.0, self.grid.n_steps)
        idx = np.minimum(pos.astype(np.int64), self.grid.n_steps - 1)
        frac = pos - idx
        lo = self.values[idx]
        hi = self.values[idx + 1]
        frac = frac.reshape(frac.shape + (1,) * (self.values.ndim - 1))
        out = lo + frac * (hi - lo)
        return float(out) if out.ndim == 0 and t.ndim == 0 else out

    def midpoint_values(self):
        return 0.5 * (self.values[:-1] + self.values[1:])


@dataclass(frozen=True)
class AggregateProgress(GridFunction):
    """Fraction of the population arrived by each node: the feasible set
    asks for rho(0)=0, rho <= 1, and increments in [0, u_max*h]."""

    def __post_init__(self):
        super().__post_init__()
        v = self.values
        if v.ndim != 1:
            raise ValueError("aggregate progress is scalar valued")
        if abs(v[0]) > 1e-12:
            raise ValueError(f"rho(0) = {v[0]} should be 0")
        if np.any(v < -PROGRESS_ATOL) or np.any(v > 1.0 + PROGRESS_ATOL):
            raise ValueError("aggregate progress leaves [0, 1]")
        if np.any(np.diff(v) < -PROGRESS_ATOL):
            raise ValueError("aggregate progress decreases")


def in_progress_set(f, u_max):
    """Membership test used by project_to_D's early exit.

    The increment cap carries a 1-ulp margin: rebuilding values from
    capped increments can round a difference up by half an ulp, and the
    margin is what makes the projection idempotent bitwise.
    """
    v = f.values
    if v.ndim != 1 or v[0] != 0.0:
        return False
    if np.any(v < 0.0) or np.any(v > 1.0):
        return False
    d = np.diff(v)
    cap = u_max * f.grid.h + 4e-16 * max(1.0, u_max)
    return bool(np.all(d >= 0.0) and np.all(d <= cap))


def project_to_D(f, u_max):
    """Project a scalar grid function onto the feasible aggregates.

    Forces f(0)=0, clips increments to [0, u_max*h], caps values at 1.
    Members of the set pass through bitwise unchanged.
    """
    if isinstance(f, GridFunction) and in_progress_set(f, u_max):
        return AggregateProgress(f.grid, f.values)
    cap = u_max * f.grid.h
    d = np.clip(np.diff(f.values), 0.0, cap)
    v = np.empty_like(f.values)
    v[0] = 0.0
    np.cumsum(d, out=v[1:])
    np.minimum(v, 1.0, out=v)
    return AggregateProgress(f.grid, v)


# ---------------------------------------------------------------------------
# small norms used all over the test and reporting surface
# ---------------------------------------------------------------------------

def sup_norm(a, b=None):
    va = a.values if isinstance(a, GridFunction) else np.asarray(a)
    if b is None:
        return float(np.max(np.abs(va)))
    vb = b.values if isinstance(b, GridFunction) else np.asarray(b)
    return float(np.max(np.abs(va - vb)))


def d_alpha(a, b, alpha, grid=None):
    """Weighted sup distance sup_t e^{-alpha t} |a(t) - b(t)| over nodes."""
    if grid is None:
        grid = a.grid
    va = a.values if isinstance(a, GridFunction) else np.asarray(a)
    vb = b.values if isinstance(b, GridFunction) else np.asarray(b)
    diff = np.abs(va - vb)
    weight = np.exp(-alpha * grid.nodes)
    weight = weight.reshape(weight.shape + (1,) * (diff.ndim - 1))
    return float(np.max(weight * diff))
