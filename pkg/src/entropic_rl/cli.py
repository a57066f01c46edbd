"""Command-line entry point.

Subcommands: solve (exact tabular values), gridworld (exponential
Q-learning runs), verify-gradients (gradient identity report),
train-critic (critic stability comparison), rseac (actor-critic
training). Exit codes: 0 success, 2 validation error, 3 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .harness import ConfigError, ExperimentConfig, run, verify_gradients, \
    write_gradient_report
from .mdp import MdpValidationError, StochasticTabularPolicy, TabularMDP
from .oracle import SolverError, soft_value_dp


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--beta", type=float)
    parser.add_argument("--steps", type=int)
    parser.add_argument("--seed", type=int, action="append", dest="seeds")
    parser.add_argument("--env")
    parser.add_argument("--mode")
    parser.add_argument("--out")
    parser.add_argument("--episodes", type=int)


def _build_config(args, kind) -> ExperimentConfig:
    doc = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    doc["kind"] = kind
    for key in ("beta", "steps", "seeds", "env", "mode", "out", "episodes"):
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    return ExperimentConfig.from_json(doc)


def _cmd_solve(args) -> int:
    with open(args.mdp, encoding="utf-8") as fh:
        mdp = TabularMDP.from_json(fh.read())
    policy = StochasticTabularPolicy.uniform(mdp.n_states, mdp.n_actions)
    mode = "discounted" if mdp.discount is not None and mdp.horizon is None \
        else "finite-horizon"
    table = soft_value_dp(mdp, policy, args.beta, mode=mode,
                          gamma=mdp.discount)
    v0 = table.v[0] if mode == "finite-horizon" else table.v
    out = args.out or "values.csv"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", "soft_value"])
        for s, v in enumerate(v0):
            writer.writerow([s, repr(float(v))])
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="entropic-rl",
        description="Risk-sensitive RL experiments (entropic risk measure)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="exact soft values of a tabular MDP")
    p_solve.add_argument("--mdp", required=True, help="MDP JSON file")
    p_solve.add_argument("--beta", type=float, default=0.0)
    p_solve.add_argument("--out")

    for name in ("gridworld", "train-critic", "rseac"):
        _add_common(sub.add_parser(name))

    p_ver = sub.add_parser("verify-gradients")
    p_ver.add_argument("--config")
    p_ver.add_argument("--beta", type=float)
    p_ver.add_argument("--seed", type=int, action="append", dest="seeds")
    p_ver.add_argument("--out")

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "verify-gradients":
            config = _build_config(args, "verify-gradients")
            rows = verify_gradients(config)
            out = config.out if config.out != "results" else "gradient_report.csv"
            write_gradient_report(rows, out)
            failed = [r for r in rows if not r[3]]
            print(f"wrote {out}: {len(rows) - len(failed)}/{len(rows)} passed")
            return 0 if not failed else 3
        config = _build_config(args, args.command)
        return run(config)
    except (ConfigError, MdpValidationError, FileNotFoundError,
            json.JSONDecodeError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
