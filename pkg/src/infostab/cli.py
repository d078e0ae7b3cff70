"""Command line entry point: ``infostab {simulate,audit,solve-expopt,ids,export}``.

Configuration is a YAML (or JSON) file with optional sections ``game``,
``policy``, ``adversary``, ``solver`` and ``output``; command-line flags
override it. Exit codes: 0 success, 1 audit failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import harness
from .adversaries import adversary_from_dict, run_rng
from .bayes_ids import ids_bound, monte_carlo_ids, prior_from_dict
from .errors import InfostabError
from .expopt import LambdaInstance, solution_to_dict, solve_exploration
from .games import DecisionSet, epsilon_D, game_from_dict
from .geometry import Potential
from .learners import diameter

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def load_config(path):
    if path is None:
        return {}
    path = Path(path)
    try:
        text = path.read_text()
        doc = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping of sections")
    return doc


def _section(cfg, name):
    sec = cfg.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return dict(sec)


def _settings(args, cfg):
    """Merge flags over the config; returns the per-section dicts plus run controls."""
    game = _section(cfg, "game")
    policy = _section(cfg, "policy")
    adversary = _section(cfg, "adversary")
    solver = _section(cfg, "solver")
    output = _section(cfg, "output")
    run = _section(cfg, "run")
    if args.d is not None:
        game["d"] = args.d
    game.setdefault("kind", "armed_bandit")
    game.setdefault("d", 2)
    if args.n is not None:
        run["n"] = args.n
    if args.seed is not None:
        run["seed"] = args.seed
    if args.runs is not None:
        run["runs"] = args.runs
    if args.eta is not None:
        policy["eta"] = solver["eta"] = args.eta
    if args.precision is not None:
        solver["precision"] = args.precision
    if args.out is not None:
        output["path"] = args.out
    if args.format is not None:
        output["format"] = args.format
    run.setdefault("n", 100)
    run.setdefault("seed", 0)
    run.setdefault("runs", 10)
    output.setdefault("format", "json")
    return game, policy, adversary, solver, output, run


def _emit(doc):
    print(json.dumps(doc, indent=2))


def cmd_simulate(args, cfg):
    game_doc, policy_doc, adv_doc, _, output, run = _settings(args, cfg)
    n, runs, seed = int(run["n"]), int(run["runs"]), int(run["seed"])
    d = int(game_doc.get("d", 2))
    adversary = adversary_from_dict(adv_doc, d=d, n=n)
    kind = policy_doc.get("kind", "sqrt2dn")
    if kind == "sqrt2dn" and "eta" not in policy_doc and game_doc.get("kind") in ("armed_bandit", "bandit"):
        rep = harness.run_sqrt2dn_bandit(d, n, adversary, runs, seed, keep_records=bool(output.get("path")))
        records, summary = rep.records, rep.to_dict()
        summary["per_round_mean"] = rep.per_round.tolist()
    else:
        game = game_from_dict(game_doc)
        mc = harness.monte_carlo(harness.policy_from_dict(policy_doc), game, adversary, n, runs, seed,
                                 keep_records=bool(output.get("path")))
        records, summary = mc.records, mc.to_dict()
    if output.get("path"):
        harness.export(records, output["format"], output["path"])
    if not output.get("per_round", False):
        summary.pop("per_round_mean", None)
    _emit(summary)
    return EXIT_OK


def cmd_audit(args, cfg):
    audit = _section(cfg, "audit")
    if args.seed is not None:
        audit["seed"] = args.seed
    if args.runs is not None:
        audit["samples"] = args.runs
    if args.precision is not None:
        audit["precision"] = args.precision
    report = harness.audit_all(audit)
    doc = report.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2))
    _emit(doc)
    return EXIT_OK if report.passed else EXIT_AUDIT


def _potential(doc):
    return Potential.from_name(doc.get("potential", "negsqrt"), doc.get("s"))


def cmd_solve_expopt(args, cfg):
    game_doc, _, _, solver, output, _ = _settings(args, cfg)
    game = game_from_dict(game_doc)
    dset = DecisionSet.simplex(game.d)
    if solver.get("clip"):
        dset = DecisionSet.clipped_simplex(game.d, float(solver["clip"]))
    q = np.asarray(solver.get("q", np.full(game.d, 1.0 / game.d)), dtype=float)
    inst = LambdaInstance(game, dset, q, float(solver.get("eta", 0.1)), _potential(solver))
    sol = solve_exploration(inst, float(solver.get("precision", 1e-3)), int(solver.get("budget", 10_000)),
                            solver.get("method"))
    doc = solution_to_dict(sol, game)
    doc["reference"] = inst.eta * math.sqrt(game.d) / 4
    if output.get("path"):
        Path(output["path"]).write_text(json.dumps(doc, indent=2))
    _emit(doc)
    return EXIT_OK


def cmd_ids(args, cfg):
    _, _, _, solver, output, run = _settings(args, cfg)
    prior_doc = _section(cfg, "prior")
    if not prior_doc:
        raise ConfigError("the ids command needs a 'prior' section with a game and a support")
    if "game" not in prior_doc and cfg.get("game"):
        prior_doc["game"] = cfg["game"]
    prior = prior_from_dict(prior_doc)
    pot = _potential(solver) if "potential" in solver else Potential.negentropy()
    dset = DecisionSet.conv_hull(prior.game)
    mc = monte_carlo_ids(prior, pot, int(run["runs"]), rng=run_rng(int(run["seed"])), dset=dset)
    n = prior.n
    beta = mc.max_ratio
    bound = ids_bound(n, epsilon_D(prior.game, dset), diameter(pot, dset), beta)
    doc = {"episodes": len(mc.regrets), "mean_regret": mc.mean, "se": mc.se, "beta_hat": beta, "bound": bound,
           "holds": bool(mc.mean <= bound + 3 * mc.se)}
    if output.get("path"):
        Path(output["path"]).write_text(json.dumps(doc, indent=2))
    _emit(doc)
    return EXIT_OK


def cmd_export(args, cfg):
    _, _, _, _, output, _ = _settings(args, cfg)
    if not args.input:
        raise ConfigError("export needs --input <records.json>")
    if not output.get("path"):
        raise ConfigError("export needs --out <path>")
    records = harness.load_records(args.input)
    harness.export(records, output["format"], output["path"])
    _emit({"records": len(records), "path": str(output["path"]), "format": output["format"]})
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "audit": cmd_audit, "solve-expopt": cmd_solve_expopt, "ids": cmd_ids,
            "export": cmd_export}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON file with game/policy/adversary/solver/output sections")
    common.add_argument("--seed", type=int)
    common.add_argument("--runs", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--d", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--eta", type=float)
    common.add_argument("--precision", type=float)
    parser = argparse.ArgumentParser(prog="infostab", description="Bandit and partial monitoring experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "export":
            p.add_argument("--input", help="records JSON written by simulate --format json")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, InfostabError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
