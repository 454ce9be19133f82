"""Run configuration files: one JSON document describing a game instance
plus solver settings.  Unknown keys are rejected at every level."""

import hashlib
import json
from dataclasses import dataclass

from .errors import ConfigError
from .model import DEFAULT_STEP, DEFAULT_TAIL_TOL, ModelSpec, RewardScheme, TimeGrid

_TOP_KEYS = {"efforts", "costs", "switching_costs", "reward", "grid", "eta",
             "fp", "seed"}
_REWARD_KEYS = {"family", "params"}
_GRID_KEYS = {"h", "tail_tol"}
_FP_KEYS = {"max_iters", "tol"}
_REWARD_PARAMS = {"linear": {"a", "b"}, "power": {"a", "p"},
                  "table": {"x", "y"}}


@dataclass(frozen=True)
class RunConfig:
    spec: ModelSpec
    grid: TimeGrid
    eta: float
    fp_max_iters: int
    fp_tol: float | None
    seed: int
    sha256: str

    @classmethod
    def from_file(cls, path):
        with open(path, "rb") as fh:
            raw = fh.read()
        doc = json.loads(raw.decode("utf-8"))
        cfg = cls.from_dict(doc)
        object.__setattr__(cfg, "sha256", hashlib.sha256(raw).hexdigest())
        return cfg

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config root must be an object")
        _reject_unknown(doc, _TOP_KEYS, "config")
        for key in ("efforts", "costs", "switching_costs", "reward"):
            if key not in doc:
                raise ConfigError(f"missing required key {key!r}")

        reward_doc = doc["reward"]
        if not isinstance(reward_doc, dict):
            raise ConfigError("reward must be an object")
        _reject_unknown(reward_doc, _REWARD_KEYS, "reward")
        family = reward_doc.get("family")
        params = reward_doc.get("params", {})
        if family not in _REWARD_PARAMS:
            raise ConfigError(f"unknown reward family {family!r}")
        _reject_unknown(params, _REWARD_PARAMS[family], f"reward.params ({family})")
        if family == "linear":
            reward = RewardScheme.linear(params["a"], params["b"])
        elif family == "power":
            reward = RewardScheme.power(params["a"], params["p"])
        else:
            reward = RewardScheme.table(params["x"], params["y"])

        try:
            spec = ModelSpec(u=doc["efforts"], c=doc["costs"],
                             g=doc["switching_costs"], reward=reward)
        except (ValueError, TypeError) as err:
            raise ConfigError(f"malformed model arrays: {err}") from err

        grid_doc = doc.get("grid", {})
        _reject_unknown(grid_doc, _GRID_KEYS, "grid")
        h = float(grid_doc.get("h", DEFAULT_STEP))
        tail_tol = float(grid_doc.get("tail_tol", DEFAULT_TAIL_TOL))
        if spec.u_min > 0.0:
            grid = TimeGrid.for_model(spec, h=h, tail_tol=tail_tol)
        else:
            # invalid efforts: keep a placeholder grid so `validate` can
            # still produce its diagnostics
            grid = TimeGrid(h=h, n_steps=1, tail_tol=tail_tol)

        fp_doc = doc.get("fp", {})
        _reject_unknown(fp_doc, _FP_KEYS, "fp")
        tol = fp_doc.get("tol")
        return cls(spec=spec, grid=grid, eta=float(doc.get("eta", 0.2)),
                   fp_max_iters=int(fp_doc.get("max_iters", 500)),
                   fp_tol=None if tol is None else float(tol),
                   seed=int(doc.get("seed", 0)), sha256="")


def _reject_unknown(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
