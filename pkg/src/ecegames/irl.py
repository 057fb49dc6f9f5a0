"""Inverse learning of per-agent cost weights by feature-expectation matching.

Weights are adjusted until the expected feature sums under equilibrium play
match the empirical means of the demonstrations:

    w^i <- w^i - gamma (E_demo phi^i - E_model phi^i),

swept agent by agent (block coordinate descent).  The model expectation is a
Monte-Carlo average over sampled equilibrium rollouts and is refreshed after
every weight update, since one agent's cost change moves every agent's
equilibrium behavior.

Two modes:
  * ``joint`` solves the full coupled game at the current weights;
  * ``independent`` learns each agent against the other agents replayed
    open-loop from the demonstrations (their mean action sequences), the
    stand-in for non-interactive baselines.  With a single agent both modes
    coincide exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EcegamesError, NonConvergenceError
from .features import FeatureBasis, eval_features, make_cost_model, validate_weights
from .game import AffineGaussianPolicySet, Array, GameSpec, TrajectoryBatch, pin_other_agents
from .ilq import SolverConfig, solve_ece
from .simulate import simulate_stochastic

GameFactory = Callable[[Sequence[Array]], GameSpec]


@dataclass(frozen=True)
class LearnConfig:
    """Learning-loop controls.

    ``learning_rate`` is the gradient step gamma; ``samples_per_expectation``
    the Monte-Carlo sample count p; convergence is declared when every
    agent's relative feature-matching residual drops below ``residual_tol``.
    ``standardize_gaps`` divides feature gaps by the demo-mean magnitudes
    before stepping so differently scaled features learn at comparable
    rates (set False for the raw update).
    """

    learning_rate: float = 0.05
    samples_per_expectation: int = 50
    max_outer_iterations: int = 200
    residual_tol: float = 0.05
    mode: str = "joint"
    base_seed: int = 0
    standardize_gaps: bool = True
    effort_weight_floor: float = 1e-3

    def __post_init__(self):
        if self.learning_rate < 0.0:
            raise ValueError("learning rate must be non-negative")
        if self.samples_per_expectation < 1:
            raise ValueError("need at least one sample per expectation")
        if self.mode not in ("joint", "independent"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class AgentUpdateRecord:
    iteration: int
    agent: int
    weights: Array
    gap: Array
    residual: float
    solver_iterations: int
    effort_floored: bool


@dataclass
class LearnTrace:
    records: list[AgentUpdateRecord] = field(default_factory=list)
    converged: bool = False

    def residual_history(self) -> dict[int, list[float]]:
        out: dict[int, list[float]] = {}
        for rec in self.records:
            out.setdefault(rec.agent, []).append(rec.residual)
        return out


class LearnSolveError(EcegamesError):
    """Equilibrium solve failed during learning; carries the offending weights."""

    def __init__(self, agent: int, weights: Sequence[Array], cause: Exception):
        self.agent = agent
        self.weights = [np.asarray(w) for w in weights]
        super().__init__(f"equilibrium solve failed while updating agent {agent}: {cause}")


def empirical_feature_mean(basis: FeatureBasis, demos: TrajectoryBatch) -> list[Array]:
    """Per-agent arithmetic mean of the per-trajectory feature sums."""
    if len(demos) == 0:
        raise ValueError("demonstration batch is empty")
    sums = [np.zeros(len(feats)) for feats in basis.agents]
    for traj in demos:
        for i, vec in enumerate(eval_features(basis, traj)):
            sums[i] += vec
    return [s / len(demos) for s in sums]


def estimate_feature_expectation(
    game: GameSpec,
    basis: FeatureBasis,
    samples: int,
    base_seed: int,
    *,
    solver_config: SolverConfig | None = None,
    warm_start: AffineGaussianPolicySet | None = None,
) -> tuple[list[Array], AffineGaussianPolicySet, int]:
    """Monte-Carlo feature expectations under the game's equilibrium policies.

    Solves the equilibrium once, then averages feature sums over ``samples``
    stochastic rollouts with trial seeds ``base_seed + j`` (initial states
    drawn from the game's initial-state distribution).  Returns the per-agent
    expectation vectors, the solved policies (for warm starts) and the solver
    iteration count.
    """
    solution = _solve_with_retry(game, warm_start, solver_config)
    sums = [np.zeros(len(feats)) for feats in basis.agents]
    for j in range(samples):
        traj = simulate_stochastic(game, solution.policies, seed=base_seed + j)
        for i, vec in enumerate(eval_features(basis, traj)):
            sums[i] += vec
    means = [s / samples for s in sums]
    return means, solution.policies, len(solution.trace)


def _solve_with_retry(game, warm_start, solver_config):
    # A stale warm start can strand the line search; fall back to cold start.
    try:
        return solve_ece(game, init=warm_start, config=solver_config)
    except EcegamesError:
        if warm_start is None:
            raise
        return solve_ece(game, init=None, config=solver_config)


def update_weights(
    w: Array,
    demo_mean: Array,
    model_mean: Array,
    learning_rate: float,
    *,
    standardize: bool = True,
    effort_index: int | None = None,
    effort_floor: float = 1e-3,
) -> tuple[Array, bool]:
    """One gradient step on the feature-matching gap.

    Applies w <- w - gamma * (demo_mean - model_mean), optionally dividing
    the gap elementwise by |demo_mean| + 1e-8.  The own effort weight is
    floored to keep the induced action cost positive definite; the returned
    flag records whether the floor was active.
    """
    w = np.asarray(w, dtype=float)
    gap = np.asarray(demo_mean, dtype=float) - np.asarray(model_mean, dtype=float)
    if standardize:
        gap = gap / (np.abs(demo_mean) + 1e-8)
    new_w = w - learning_rate * gap
    floored = False
    if effort_index is not None and new_w[effort_index] < effort_floor:
        new_w[effort_index] = effort_floor
        floored = True
    return new_w, floored


def _effort_index(basis: FeatureBasis, agent: int) -> int | None:
    for k, f in enumerate(basis.agents[agent]):
        if f.name == "control":
            return k
    return None


def _relative_residual(gap: Array, demo_mean: Array) -> float:
    """Root-mean-square of per-feature relative gaps.

    Normalizing per feature before aggregating keeps a large-magnitude
    feature (typically control effort) from masking mismatch in the others.
    """
    rel = gap / (np.abs(demo_mean) + 1e-8)
    return float(np.sqrt(np.mean(rel * rel)))


def _mean_demo_actions(demos: TrajectoryBatch) -> list[Array]:
    N = demos.num_agents
    out = []
    for j in range(N):
        out.append(np.mean([traj.actions[j] for traj in demos], axis=0))
    return out


def run_mairl(
    game_factory: GameFactory,
    basis: FeatureBasis,
    demos: TrajectoryBatch,
    init_weights: Sequence[Array],
    cfg: LearnConfig | None = None,
    *,
    solver_config: SolverConfig | None = None,
) -> tuple[list[Array], LearnTrace]:
    """Learn all agents' feature weights from interaction demonstrations.

    Outer loop over block-coordinate sweeps: for each agent in turn, estimate
    its feature expectation under the current full weight set, take one
    gradient step on that agent's weights, and continue with the refreshed
    set.  Equilibrium solves are warm-started from the previous iteration.
    Convergence requires every agent's relative feature-matching residual
    (RMS of per-feature relative gaps) below tolerance within one sweep; if
    the budget runs out the trace is flagged and the best-residual weights
    are returned.
    """
    cfg = cfg or LearnConfig()
    weights = [w.copy() for w in validate_weights(basis, init_weights)]
    demo_means = empirical_feature_mean(basis, demos)
    N = basis.num_agents
    p = cfg.samples_per_expectation
    trace = LearnTrace()

    replay = _mean_demo_actions(demos) if cfg.mode == "independent" else None
    warm: dict[int, AffineGaussianPolicySet] = {}

    best_total = np.inf
    best_weights = [w.copy() for w in weights]

    for sweep in range(cfg.max_outer_iterations):
        residuals = np.empty(N)
        for i in range(N):
            seed = cfg.base_seed + (sweep * N + i) * p
            game = game_factory(weights)
            try:
                if cfg.mode == "joint":
                    means, policies, iters = estimate_feature_expectation(
                        game,
                        basis,
                        p,
                        seed,
                        solver_config=solver_config,
                        warm_start=warm.get(-1),
                    )
                    warm[-1] = policies
                    model_mean = means[i]
                else:
                    pinned, embed = pin_other_agents(game, i, replay)
                    solution = _solve_with_retry(pinned, warm.get(i), solver_config)
                    warm[i] = solution.policies
                    iters = len(solution.trace)
                    acc = np.zeros(len(basis.agents[i]))
                    for j in range(p):
                        traj = embed(
                            simulate_stochastic(pinned, solution.policies, seed=seed + j)
                        )
                        acc += eval_features(basis, traj)[i]
                    model_mean = acc / p
            except EcegamesError as exc:
                raise LearnSolveError(agent=i, weights=weights, cause=exc) from exc

            gap = demo_means[i] - model_mean
            residuals[i] = _relative_residual(gap, demo_means[i])
            weights[i], floored = update_weights(
                weights[i],
                demo_means[i],
                model_mean,
                cfg.learning_rate,
                standardize=cfg.standardize_gaps,
                effort_index=_effort_index(basis, i),
                effort_floor=cfg.effort_weight_floor,
            )
            trace.records.append(
                AgentUpdateRecord(
                    iteration=sweep + 1,
                    agent=i,
                    weights=weights[i].copy(),
                    gap=gap,
                    residual=residuals[i],
                    solver_iterations=iters,
                    effort_floored=floored,
                )
            )
        total = float(np.sum(residuals))
        if total < best_total:
            best_total = total
            best_weights = [w.copy() for w in weights]
        if np.all(residuals < cfg.residual_tol):
            trace.converged = True
            return weights, trace

    trace.converged = False
    return best_weights, trace
