"""Command-line interface: generate demos, solve, learn, evaluate, validate.

Every command is deterministic given its inputs and ``--seed``; re-running
produces byte-identical outputs.  Exit codes: 0 success, 1 runtime failure
(solver or ingest), 2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import Scenario, load_scenario
from .errors import EcegamesError, ConfigError, IngestError, NonConvergenceError
from .ilq import solve_ece
from .irl import run_mairl
from .metrics import (
    HistogramSpec,
    goal_distance_stats,
    kl_divergence_per_feature,
    trajectory_rmse,
)
from .simulate import rollout_batch, simulate_mean
from . import trajio

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def _fail(message: str, code: int = RUNTIME_ERROR) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load(config_path: str) -> Scenario:
    return load_scenario(config_path)


def _require_true_weights(scenario: Scenario):
    weights = scenario.true_weights()
    if weights is None:
        raise ConfigError("config does not define true_weights for every agent")
    return weights


def cmd_gen_demos(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.config)
        weights = _require_true_weights(scenario)
        game = scenario.make_game(weights)
        solution = solve_ece(game, config=scenario.solver_config)
        batch = rollout_batch(game, solution.policies, args.trials, args.seed)
        trajio.write_trajectories(args.out, batch)
    except ConfigError as exc:
        return _fail(str(exc), USAGE_ERROR)
    except NonConvergenceError as exc:
        return _fail(f"equilibrium solve did not converge: {exc}")
    except EcegamesError as exc:
        return _fail(str(exc))
    print(f"wrote {args.trials} trajectories to {args.out}")
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.config)
        weights = _require_true_weights(scenario)
        game = scenario.make_game(weights)
    except ConfigError as exc:
        return _fail(str(exc), USAGE_ERROR)
    try:
        solution = solve_ece(game, config=scenario.solver_config)
    except NonConvergenceError as exc:
        if args.trace and exc.trace is not None:
            trajio.write_iteration_trace(args.trace, exc.trace, scenario.num_agents)
        return _fail(f"equilibrium solve did not converge: {exc}")
    except EcegamesError as exc:
        return _fail(str(exc))
    trajio.write_policy(args.out_policy, solution.policies)
    if args.trace:
        trajio.write_iteration_trace(args.trace, solution.trace, scenario.num_agents)
    print(
        f"converged in {len(solution.trace)} iterations; policy written to {args.out_policy}"
    )
    return 0


def cmd_learn(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.config)
        demos = trajio.read_trajectories(
            args.demos, scenario.state_dim, scenario.action_dims
        )
        if demos.horizon != scenario.horizon or demos.num_agents != scenario.num_agents:
            raise IngestError(
                f"{args.demos}: demo dimensions do not match the scenario "
                f"(horizon {demos.horizon} vs {scenario.horizon})"
            )
    except ConfigError as exc:
        return _fail(str(exc), USAGE_ERROR)
    except IngestError as exc:
        return _fail(str(exc))

    cfg = scenario.learn_config
    overrides = {"base_seed": args.seed}
    if args.mode is not None:
        overrides["mode"] = args.mode
    if args.lr is not None:
        overrides["learning_rate"] = args.lr
    if args.samples is not None:
        overrides["samples_per_expectation"] = args.samples
    cfg = replace(cfg, **overrides)

    init = [np.ones(len(feats)) for feats in scenario.basis.agents]
    try:
        weights, trace = run_mairl(
            scenario.make_game,
            scenario.basis,
            demos,
            init,
            cfg,
            solver_config=scenario.solver_config,
        )
    except EcegamesError as exc:
        return _fail(str(exc))
    names = [scenario.basis.feature_names(i) for i in range(scenario.num_agents)]
    trajio.write_weights(args.out_weights, weights, names)
    if args.trace:
        trajio.write_learn_trace(args.trace, trace)
    last = {rec.agent: rec.residual for rec in trace.records}
    summary = ", ".join(f"agent{i}={last[i]:.4f}" for i in sorted(last))
    status = "converged" if trace.converged else "NOT converged"
    print(f"{status}; final feature-matching residuals: {summary}")
    return 0 if trace.converged else RUNTIME_ERROR


def cmd_eval(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.config)
        demos = trajio.read_trajectories(
            args.demos, scenario.state_dim, scenario.action_dims
        )
        if args.weights is not None:
            weights = trajio.read_weights(args.weights)
        else:
            weights = _require_true_weights(scenario)
        game = scenario.make_game(weights)
    except ConfigError as exc:
        return _fail(str(exc), USAGE_ERROR)
    except (IngestError, EcegamesError) as exc:
        return _fail(str(exc))

    try:
        solution = solve_ece(game, config=scenario.solver_config)
        model = rollout_batch(game, solution.policies, args.trials, args.seed)
    except EcegamesError as exc:
        return _fail(str(exc))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kls = kl_divergence_per_feature(demos, model, scenario.basis, HistogramSpec())
    names = [scenario.basis.feature_names(i) for i in range(scenario.num_agents)]
    trajio.write_kl_table(out_dir / "kl.csv", kls, names)
    stats = goal_distance_stats(model, scenario.goals, scenario.position_indices)
    trajio.write_goal_stats(out_dir / "goal_stats.csv", stats)
    demo_mean_states = np.mean([traj.states for traj in demos], axis=0)
    rmse = trajectory_rmse(demo_mean_states, model, scenario.position_indices)
    trajio.write_rmse(out_dir / "rmse.csv", rmse)

    total = float(np.sum([np.sum(v) for v in kls]))
    print(f"wrote kl.csv, goal_stats.csv, rmse.csv to {out_dir}")
    print(f"total KL(demo||model) over agents and features: {total:.6f}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        scenario = _load(args.config)
        batch = trajio.read_trajectories(
            args.trajectories, scenario.state_dim, scenario.action_dims
        )
        if batch.horizon != scenario.horizon:
            raise IngestError(
                f"{args.trajectories}: horizon {batch.horizon} != scenario horizon "
                f"{scenario.horizon}"
            )
    except ConfigError as exc:
        return _fail(str(exc), USAGE_ERROR)
    except IngestError as exc:
        return _fail(str(exc))
    print(f"{args.trajectories}: OK ({len(batch)} trajectories, horizon {batch.horizon})")
    return 0


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecegames",
        description="Equilibrium solvers and inverse cost learning for dynamic games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", help="sample demonstration rollouts under true weights")
    p.add_argument("--config", required=True)
    p.add_argument("--trials", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_demos)

    p = sub.add_parser("solve", help="solve equilibrium policies under true weights")
    p.add_argument("--config", required=True)
    p.add_argument("--out-policy", required=True)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("learn", help="learn feature weights from demonstrations")
    p.add_argument("--config", required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--mode", choices=["joint", "independent"], default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--samples", type=_positive_int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-weights", required=True)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("eval", help="compare demo and model feature distributions")
    p.add_argument("--config", required=True)
    p.add_argument("--demos", required=True)
    p.add_argument("--weights", default=None, help="weights JSON (default: config true_weights)")
    p.add_argument("--trials", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory for the metric tables")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate", help="check a trajectory file against a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--trajectories", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
