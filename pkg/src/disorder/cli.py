"""Command-line interface.

Subcommands: validate, simulate, evaluate, value-iterate, oracle, crosscheck.
Exit codes: 0 success / all checks pass, 1 usage error, 2 validation failure,
3 invariant failure.  Errors are echoed as one JSON record per line on
stderr.  Relative output paths honour the DISORDER_OUT_DIR environment
variable when set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import crosscheck as crosscheck_mod
from . import oracle as oracle_mod
from .errors import ConfigError, DisorderError
from .model import load_spec, validate
from .posterior import state_init, state_step
from .simulate import (
    TrajectorySampler,
    fixed_time_rule,
    mix_seed,
    monte_carlo_eval,
    posterior_threshold_rule,
    report_to_csv,
    report_to_json,
)
from .stopping import OptimalStoppingRule, ValueIterConfig, value_iterate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_INVARIANT = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit_error(kind: str, detail: str) -> None:
    print(json.dumps({"error": kind, "detail": detail}), file=sys.stderr)


def _out_path(raw: str) -> Path:
    path = Path(raw)
    base = os.environ.get("DISORDER_OUT_DIR")
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _load_valid_spec(config: str):
    spec = load_spec(config)
    report = validate(spec)
    if report:
        for item in report:
            _emit_error("validation", item)
        return None
    return spec


def _build_parser() -> _Parser:
    parser = _Parser(prog="disorder", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model config file")
    p.add_argument("config")

    p = sub.add_parser("simulate", help="sample trajectories to CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="Monte Carlo comparison of stopping rules")
    p.add_argument("--config", required=True)
    p.add_argument("--rules", default="optimal,fixed,threshold")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--json-out", default=None)
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--variant", choices=("expected", "literal"), default="expected")

    p = sub.add_parser("value-iterate", help="continuation values at probe states")
    p.add_argument("--config", required=True)
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--probe", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("oracle", help="exact joint table and optimal value")
    p.add_argument("--config", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--dump", default=None)

    p = sub.add_parser("crosscheck", help="run the filter/oracle identity battery")
    p.add_argument("--config", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--seed", type=int, default=7)
    return parser


def _cmd_validate(args) -> int:
    spec = load_spec(args.config)
    report = validate(spec)
    if report:
        for item in report:
            print(f"VIOLATION {item}")
            _emit_error("validation", item)
        return EXIT_VALIDATION
    print("OK")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spec = _load_valid_spec(args.config)
    if spec is None:
        return EXIT_VALIDATION
    sampler = TrajectorySampler(spec, args.horizon)
    out = _out_path(args.out)
    header = ["trajectory", "seed", "theta", "beta1", "beta2"]
    header += [f"x{t}" for t in range(args.horizon + 1)]
    lines = [",".join(header)]
    for idx in range(args.n):
        traj = sampler.sample(mix_seed(args.seed, idx))
        row = [
            str(idx),
            str(traj.seed),
            str(traj.latent.theta),
            str(traj.latent.beta1),
            str(traj.latent.beta2),
        ]
        row += [str(s) for s in traj.observations]
        lines.append(",".join(row))
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {args.n} trajectories to {out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    spec = _load_valid_spec(args.config)
    if spec is None:
        return EXIT_VALIDATION
    cfg = ValueIterConfig(k_max=args.kmax, tol=args.tol)
    available = {
        "optimal": lambda: OptimalStoppingRule(spec, cfg, variant=args.variant),
        "fixed": lambda: fixed_time_rule(spec),
        "threshold": lambda: posterior_threshold_rule(spec),
    }
    rules = {}
    for name in args.rules.split(","):
        name = name.strip()
        if name not in available:
            raise UsageError(f"unknown rule {name!r}; choose from {sorted(available)}")
        rules[name] = available[name]()
    report = monte_carlo_eval(spec, rules, args.n, args.horizon, args.seed)
    out = _out_path(args.out)
    report_to_csv(report, out)
    if args.json_out:
        report_to_json(report, _out_path(args.json_out))
    for name in sorted(report.rules):
        stats = report.rules[name]
        print(
            f"{name}: estimate={stats.estimate:.6f} se={stats.std_error:.6f} "
            f"mean_stop={stats.mean_stop_time:.3f} censored={stats.censored_rate:.4f}"
        )
    print(f"wrote report to {out}")
    return EXIT_OK


def _cmd_value_iterate(args) -> int:
    spec = _load_valid_spec(args.config)
    if spec is None:
        return EXIT_VALIDATION
    cfg = ValueIterConfig(k_max=args.kmax, tol=args.tol, probe_points=args.probe)
    sampler = TrajectorySampler(spec, spec.d + 3)
    lines = ["probe,k,s_k"]
    all_converged = True
    for idx in range(cfg.probe_points):
        traj = sampler.sample(mix_seed(args.seed, idx))
        state = state_init(spec)
        for sym in traj.observations[1:]:
            state = state_step(spec, state, sym)
        res = value_iterate(spec, state.window, state.change_prob, state.pair_prob, cfg)
        all_converged = all_converged and res.converged
        for k, val in enumerate(res.history):
            lines.append(f"{idx},{k},{val:.17g}")
        flag = "converged" if res.converged else "NOT CONVERGED"
        print(f"probe {idx}: s_{res.k_used}={res.value:.12f} ({flag})")
    if args.out:
        _out_path(args.out).write_text("\n".join(lines) + "\n")
    if not all_converged:
        _emit_error("convergence", "some probe states did not reach the Cauchy tolerance")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    spec = _load_valid_spec(args.config)
    if spec is None:
        return EXIT_VALIDATION
    table = oracle_mod.build_joint(spec, args.horizon)
    value_r, tree = oracle_mod.exact_optimal_rule(table, restrict_after_d=True)
    value_u, _ = oracle_mod.exact_optimal_rule(table, restrict_after_d=False)
    deep_mass = sum(oracle_mod.path_prob(table, p) for p in table.levels[args.horizon])
    print(f"paths at horizon: {len(table.levels[args.horizon])}")
    print(f"total mass at horizon: {deep_mass:.15f}")
    print(f"optimal value (stops from d+1): {value_r:.15f}")
    print(f"optimal value (unrestricted):  {value_u:.15f}")
    if args.dump:
        directory = _out_path(args.dump)
        oracle_mod.dump_joint(table, directory)
        oracle_mod.dump_tree(tree, directory)
        print(f"dumped tables to {directory}")
    return EXIT_OK


def _cmd_crosscheck(args) -> int:
    spec = _load_valid_spec(args.config)
    if spec is None:
        return EXIT_VALIDATION
    results = crosscheck_mod.run_crosscheck(spec, args.horizon, seed=args.seed)
    failures = 0
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name} max_err={res.max_err:.3e} tol={res.tol:.0e}")
        if not res.passed:
            failures += 1
            _emit_error("invariant", f"{res.name} max_err={res.max_err:.3e}")
    return EXIT_OK if failures == 0 else EXIT_INVARIANT


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handlers = {
            "validate": _cmd_validate,
            "simulate": _cmd_simulate,
            "evaluate": _cmd_evaluate,
            "value-iterate": _cmd_value_iterate,
            "oracle": _cmd_oracle,
            "crosscheck": _cmd_crosscheck,
        }
        return handlers[args.command](args)
    except UsageError as exc:
        _emit_error("usage", str(exc))
        return EXIT_USAGE
    except ConfigError as exc:
        _emit_error("config", str(exc))
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        _emit_error("config", str(exc))
        return EXIT_VALIDATION
    except DisorderError as exc:
        _emit_error("runtime", str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
