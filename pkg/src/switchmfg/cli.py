"""Command-line front end.

Commands: validate, solve-hjb, solve-vi, fp, sweep, simulate, verify.
Exit codes: 0 ok, 1 model validation failed, 2 parse/usage error,
3 solver error.  Every command ingests one JSON config (flags override)
and writes CSV/JSON outputs plus a manifest into --out.
"""

import argparse
import json
import os
import sys

import numpy as np

from .config import RunConfig
from .errors import ConfigError, SolverError
from .fp import best_response, default_initial_progress, run_fp
from .limit import DEFAULT_ETAS, eta_sweep, verify_relaxed_equilibrium
from .model import AggregateProgress, validate_model
from .runio import ManifestTimer, read_csv, trajectory_csv, write_csv, write_json
from .simulate import SimConfig, deviation_test, simulate_population
from .vi import solve_hjbvi, viscosity_residual

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARSE = 2
EXIT_SOLVER = 3


def build_parser():
    p = argparse.ArgumentParser(
        prog="switchmfg",
        description="Solvers for rank-based mean-field competition with "
                    "switching effort regimes")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="JSON config file")
        sp.add_argument("--out", default=None,
                        help=f"output directory (default: out-{name})")
        return sp

    add("validate", "check every model invariant")

    sp = add("solve-hjb", "regularized backward value solve at an aggregate")
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--rho", default=None,
                    help="aggregate CSV (t,rho); default: slowest feasible")

    sp = add("solve-vi", "obstacle-scheme value solve at an aggregate")
    sp.add_argument("--rho", default=None)

    sp = add("fp", "fictitious play to the regularized equilibrium")
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--max-iters", type=int, default=None)
    sp.add_argument("--tol", type=float, default=None)

    sp = add("sweep", "vanishing-entropy ladder with obstacle-gap table")
    sp.add_argument("--etas", default=None,
                    help="comma-separated decreasing list "
                         f"(default {','.join(str(e) for e in DEFAULT_ETAS)})")
    sp.add_argument("--max-iters", type=int, default=None)

    sp = add("simulate", "finite population under the equilibrium policy")
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--agents", type=int, default=10_000)
    sp.add_argument("--stride", type=int, default=100)
    sp.add_argument("--deviants", type=int, default=0,
                    help="also estimate deviation payoffs with this many samples")

    sp = add("verify", "relaxed-equilibrium verification at small entropy")
    sp.add_argument("--eta", type=float, default=0.02)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--nu", type=float, default=None,
                    help="support-set margin (default 10*h*u_max*r)")
    sp.add_argument("--max-iters", type=int, default=None)

    return p


def _load_rho(path, grid):
    names, cols = read_csv(path)
    if "t" not in names or "rho" not in names:
        raise ConfigError(f"{path}: expected columns t,rho")
    if cols["t"].shape[0] != grid.n_steps + 1:
        raise ConfigError(f"{path}: {cols['t'].shape[0]} rows, grid wants "
                          f"{grid.n_steps + 1}")
    return AggregateProgress(grid, cols["rho"])


def _write_equilibrium(out, timer, grid, state, br, stride=1):
    trajectory_csv(timer.add(os.path.join(out, "rho.csv")), grid,
                   [("rho", state.rho.values)], stride)
    trajectory_csv(timer.add(os.path.join(out, "value.csv")), grid,
                   [("V", br.value.values)], stride)
    trajectory_csv(timer.add(os.path.join(out, "mass.csv")), grid,
                   [("m", state.m.values)], stride)
    trajectory_csv(timer.add(os.path.join(out, "policy.csv")), grid,
                   [("pi", br.policy.pi.values)], stride)


def cmd_validate(cfg, args, out, timer):
    report = validate_model(cfg.spec)
    print(report)
    write_json(timer.add(os.path.join(out, "validation.json")), {
        "ok": report.ok,
        "failures": [vars(f) | {"indices": list(f.indices)}
                     for f in report.failures],
    })
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_solve_hjb(cfg, args, out, timer):
    from .hjb import solve_hjb_backward
    eta = args.eta if args.eta is not None else cfg.eta
    rho = (_load_rho(args.rho, cfg.grid) if args.rho
           else default_initial_progress(cfg.spec, cfg.grid))
    value = solve_hjb_backward(cfg.spec, eta, rho)
    trajectory_csv(timer.add(os.path.join(out, "value.csv")), cfg.grid,
                   [("V", value.values)])
    print(f"solve-hjb: eta={eta} V(0)={np.array2string(value.values[0])}")
    return EXIT_OK


def cmd_solve_vi(cfg, args, out, timer):
    rho = (_load_rho(args.rho, cfg.grid) if args.rho
           else default_initial_progress(cfg.spec, cfg.grid))
    value = solve_hjbvi(cfg.spec, rho)
    res = viscosity_residual(value, cfg.spec, rho)
    trajectory_csv(timer.add(os.path.join(out, "value.csv")), cfg.grid,
                   [("V", value.values)])
    finite_min = np.where(np.isfinite(res.min_branch), res.min_branch, 0.0)
    trajectory_csv(timer.add(os.path.join(out, "residual.csv")), cfg.grid,
                   [("min_branch", finite_min)])
    print(f"solve-vi: V(0)={np.array2string(value.values[0])} "
          f"sup|min-branch|={res.sup_min_branch:.3e}")
    return EXIT_OK


def cmd_fp(cfg, args, out, timer):
    eta = args.eta if args.eta is not None else cfg.eta
    max_iters = args.max_iters if args.max_iters is not None else cfg.fp_max_iters
    tol = args.tol if args.tol is not None else cfg.fp_tol
    state, report = run_fp(cfg.spec, eta, max_iters=max_iters,
                           tol_exploit=tol, grid=cfg.grid)
    write_csv(timer.add(os.path.join(out, "iterations.csv")),
              ["n", "exploit", "sup_change", "payoff"],
              [np.array([r.n for r in state.history]),
               np.array([r.exploit for r in state.history]),
               np.array([r.sup_change for r in state.history]),
               np.array([r.payoff for r in state.history])])
    br = best_response(cfg.spec, eta, state.rho, cfg.grid)
    _write_equilibrium(out, timer, cfg.grid, state, br)
    write_json(timer.add(os.path.join(out, "report.json")),
               report.to_dict() | {"eta": eta, "delta": br.policy.delta.tolist()})
    print(f"fp: eta={eta} iters={report.iterations} "
          f"exploit={report.final_exploit:.3e} ({report.stop_reason})")
    return EXIT_OK


def cmd_sweep(cfg, args, out, timer):
    etas = (tuple(float(x) for x in args.etas.split(","))
            if args.etas else DEFAULT_ETAS)
    max_iters = args.max_iters if args.max_iters is not None else cfg.fp_max_iters
    report, artifacts = eta_sweep(cfg.spec, etas, max_iters=max_iters,
                                  tol_exploit=cfg.fp_tol, grid=cfg.grid,
                                  keep_artifacts=True)
    write_csv(timer.add(os.path.join(out, "gaps.csv")),
              ["eta", "gap", "exploit", "iterations", "payoff"],
              [np.array([e.eta for e in report.entries]),
               np.array([e.gap for e in report.entries]),
               np.array([e.exploit for e in report.entries]),
               np.array([e.iterations for e in report.entries]),
               np.array([e.payoff for e in report.entries])])
    for eta, (state, _rep, _value, _policy, _vvi) in artifacts.items():
        trajectory_csv(timer.add(os.path.join(out, f"rho_eta_{eta:g}.csv")),
                       cfg.grid, [("rho", state.rho.values)], stride=100)
    write_json(timer.add(os.path.join(out, "report.json")), report.to_dict())
    flag = "" if report.gap_nonincreasing else "  [WARNING: gap not non-increasing]"
    print("sweep: " + " ".join(f"{e.eta:g}:{e.gap:.4f}" for e in report.entries)
          + flag)
    return EXIT_OK


def cmd_simulate(cfg, args, out, timer):
    eta = args.eta if args.eta is not None else cfg.eta
    state, _ = run_fp(cfg.spec, eta, max_iters=cfg.fp_max_iters,
                      tol_exploit=cfg.fp_tol, grid=cfg.grid)
    br = best_response(cfg.spec, eta, state.rho, cfg.grid)
    sim = SimConfig(n_agents=args.agents, seed=cfg.seed,
                    record_stride=args.stride)
    report = simulate_population(cfg.spec, br.policy, sim)
    trajectory_csv(timer.add(os.path.join(out, "empirical.csv")), cfg.grid,
                   [("rho_hat", report.rho_hat.values),
                    ("m_hat", report.m_hat.values)], stride=args.stride)
    doc = report.to_dict()
    if args.deviants > 0:
        from .paths import brute_force_best_response
        oracle_path, _ = brute_force_best_response(cfg.spec, state.rho)
        dev = deviation_test(cfg.spec, br.policy, report.rho_hat,
                             n_deviants=args.deviants, seed=cfg.seed,
                             oracle_paths=(oracle_path,))
        doc["deviation"] = dev.to_dict()
    write_json(timer.add(os.path.join(out, "report.json")), doc)
    print(f"simulate: N={args.agents} sup-rho-gap={report.sup_rho_gap:.4f} "
          f"sup-m-gap={report.sup_m_gap:.4f}")
    return EXIT_OK


def cmd_verify(cfg, args, out, timer):
    max_iters = args.max_iters if args.max_iters is not None else cfg.fp_max_iters
    report, _ = verify_relaxed_equilibrium(
        cfg.spec, eta_small=args.eta, max_iters=max_iters,
        sample_count=args.samples, seed=cfg.seed, grid=cfg.grid,
        tol_exploit=cfg.fp_tol, support_margin=args.nu)
    write_json(timer.add(os.path.join(out, "report.json")), report.to_dict())
    print(f"verify: eta={args.eta} within-tolerance="
          f"{100 * report.fraction_within:.1f}% "
          f"max-increment={report.max_positive_increment:.2e} "
          f"rho-gap={report.rho_consistency_gap:.4f} "
          f"support={list(report.support)}")
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "solve-hjb": cmd_solve_hjb,
    "solve-vi": cmd_solve_vi,
    "fp": cmd_fp,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def _check_usage(parser, args):
    if getattr(args, "max_iters", None) is not None and args.max_iters < 1:
        parser.error("--max-iters must be >= 1")
    if getattr(args, "samples", None) is not None and args.samples < 1:
        parser.error("--samples must be >= 1")
    if getattr(args, "agents", None) is not None and args.agents < 1:
        parser.error("--agents must be >= 1")
    if getattr(args, "eta", None) is not None and args.eta <= 0.0:
        parser.error("--eta must be > 0")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _check_usage(parser, args)

    try:
        cfg = RunConfig.from_file(args.config)
    except json.JSONDecodeError as err:
        print(f"parse error: {args.config}: line {err.lineno} column "
              f"{err.colno}: {err.msg}", file=sys.stderr)
        return EXIT_PARSE
    except (ConfigError, OSError) as err:
        print(f"parse error: {args.config}: {err}", file=sys.stderr)
        return EXIT_PARSE

    out = args.out if args.out else f"out-{args.command}"
    os.makedirs(out, exist_ok=True)
    timer = ManifestTimer(args.command, cfg.sha256, cfg.seed)

    if args.command != "validate":
        report = validate_model(cfg.spec)
        if not report.ok:
            print(report, file=sys.stderr)
            return EXIT_VALIDATION

    try:
        code = _COMMANDS[args.command](cfg, args, out, timer)
    except SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    timer.finish(os.path.join(out, "manifest.json"))
    return code


if __name__ == "__main__":
    sys.exit(main())
