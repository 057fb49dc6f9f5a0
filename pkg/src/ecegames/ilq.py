"""Iterative linear-quadratic approximation for general nonlinear games.

The solver alternates four steps around a nominal trajectory until
successive mean trajectories agree:

  1. forward-simulate the current policies' means to refresh the nominal;
  2. linearize the dynamics at the nominal (delta-state / delta-action form);
  3. quadratize every agent's cost at the nominal;
  4. solve the resulting LQ-Gaussian game exactly and step toward its means,
     damping only the feedforward offsets by a halving line search that keeps
     the new trajectory within a deviation threshold of the nominal.

The converged policies are returned re-anchored on the converged nominal
with zero offsets (the feedforward is absorbed into the nominal actions), so
a mean rollout of the returned policy set reproduces the converged
trajectory exactly.  Covariances come from the final stage solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LinearizationError,
    LineSearchError,
    NonConvergenceError,
    QuadratizationError,
    SimulationDivergedError,
)
from .game import AffineGaussianPolicySet, Array, GameSpec, Trajectory, policy_with_nominal
from .lq import LqStageGame, solve_lq_ece
from .simulate import evaluate_cost, simulate_mean


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls for the nonlinear equilibrium solver.

    ``convergence_tol`` bounds the max-over-time Euclidean state deviation
    between successive mean trajectories.  ``max_step_deviation`` is the
    line-search acceptance threshold on the same metric (state units; large
    enough by default that well-scaled problems take full steps).
    ``min_step`` ends the halving sequence 1, 1/2, 1/4, ...
    """

    max_iterations: int = 100
    convergence_tol: float = 1e-4
    max_step_deviation: float = 10.0
    min_step: float = 1.0 / 64.0
    strict_paper: bool = False
    hessian_floor: float = 1e-6

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if min(self.convergence_tol, self.max_step_deviation, self.min_step) <= 0.0:
            raise ValueError("tolerances and step bounds must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    max_deviation: float
    step_size: float
    agent_costs: Array


@dataclass
class IterationTrace:
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class EceSolution:
    policies: AffineGaussianPolicySet
    trace: IterationTrace


def linearize(game: GameSpec, nominal: Trajectory) -> tuple[Array, list[Array]]:
    """Dynamics Jacobians (A_t, B_t^j) along the nominal for t = 1..T-1."""
    T, n = game.horizon, game.state_dim
    A = np.empty((T - 1, n, n))
    B = [np.empty((T - 1, n, m)) for m in game.action_dims]
    for k in range(T - 1):
        acts = [a[k] for a in nominal.actions]
        A_k, B_k = game.dynamics.jacobians(k + 1, nominal.states[k], acts)
        if not np.all(np.isfinite(A_k)) or any(not np.all(np.isfinite(b)) for b in B_k):
            raise LinearizationError(time_step=k + 1)
        A[k] = A_k
        for j in range(game.num_agents):
            B[j][k] = B_k[j]
    return A, B


def _project_psd(H: Array, floor: float) -> Array:
    """Clamp negative eigenvalues to ``floor`` so the quadratized state cost is PSD."""
    w, V = np.linalg.eigh((H + H.T) / 2.0)
    if w[0] >= 0.0:
        return (H + H.T) / 2.0
    w = np.where(w < 0.0, floor, w)
    return (V * w) @ V.T


def quadratize(
    game: GameSpec,
    nominal: Trajectory,
    *,
    strict_paper: bool = False,
    hessian_floor: float = 1e-6,
) -> tuple[list[Array], list[Array], list[Array]]:
    """Second-order cost data (Q_t^i, l_t^i, r_t^i) along the nominal.

    Q is the state-cost Hessian (PSD-projected), l the state-cost gradient,
    and r the linear own-action term 2 R^{ii} abar from recentering the
    action quadratic on the nominal actions (dropped in strict mode).
    """
    T, n, N = game.horizon, game.state_dim, game.num_agents
    Q = [np.empty((T, n, n)) for _ in range(N)]
    l = [np.empty((T, n)) for _ in range(N)]
    r = [np.empty((T, m)) for m in game.action_dims]
    for i, cost in enumerate(game.costs):
        Rii = cost.action_cost[i]
        for k in range(T):
            s = nominal.states[k]
            H = cost.state_hessian(k + 1, s)
            g = cost.state_gradient(k + 1, s)
            if not np.all(np.isfinite(H)) or not np.all(np.isfinite(g)):
                raise QuadratizationError(time_step=k + 1, agent=i)
            Q[i][k] = _project_psd(H, hessian_floor)
            l[i][k] = g
            if strict_paper:
                r[i][k] = 0.0
            else:
                r[i][k] = 2.0 * Rii @ nominal.actions[i][k]
    return Q, l, r


def stage_game_around(
    game: GameSpec,
    nominal: Trajectory,
    *,
    strict_paper: bool = False,
    hessian_floor: float = 1e-6,
) -> LqStageGame:
    """The delta-variable LQ-Gaussian game obtained by expanding at the nominal.

    The exact Taylor expansion of the action cost sum_j a_j'R_j a_j about
    abar is dabar'(R)da + 2 abar'R da, which in the stage game's
    half-quadratic convention appears as action matrices 2 R^{ij} plus the
    linear terms from :func:`quadratize`.
    """
    A, B = linearize(game, nominal)
    Q, l, r = quadratize(game, nominal, strict_paper=strict_paper, hessian_floor=hessian_floor)
    R = tuple(
        tuple(2.0 * Rij for Rij in cost.action_cost) for cost in game.costs
    )
    return LqStageGame(A=A, B=tuple(B), Q=tuple(Q), l=tuple(l), R=R, r=tuple(r))


def _max_state_deviation(a: Trajectory, b: Trajectory) -> float:
    return float(np.max(np.linalg.norm(a.states - b.states, axis=1)))


def solve_ece(
    game: GameSpec,
    init: AffineGaussianPolicySet | None = None,
    config: SolverConfig | None = None,
) -> EceSolution:
    """Approximate equilibrium policies of a nonlinear game.

    Starts from ``init`` (or all-zero feedback) and iterates
    linearize / quadratize / LQ solve / damped rollout until the mean
    trajectory moves less than ``convergence_tol``.  Raises
    :class:`NonConvergenceError` (carrying the trace and last iterate) if the
    iteration budget runs out, :class:`LineSearchError` if no admissible step
    exists.
    """
    cfg = config or SolverConfig()
    if init is None:
        init = AffineGaussianPolicySet.zero(game.horizon, game.state_dim, game.action_dims)
    nominal = simulate_mean(game, init)
    trace = IterationTrace()
    policies = init
    for it in range(1, cfg.max_iterations + 1):
        stage = stage_game_around(
            game, nominal, strict_paper=cfg.strict_paper, hessian_floor=cfg.hessian_floor
        )
        lq = solve_lq_ece(stage, game.temperatures, strict_paper=cfg.strict_paper)

        eps = 1.0
        candidate = None
        while True:
            trial_policy = AffineGaussianPolicySet(
                gains=lq.policies.gains,
                offsets=tuple(eps * a for a in lq.policies.offsets),
                covariances=lq.policies.covariances,
                nominal_states=nominal.states,
                nominal_actions=nominal.actions,
            )
            try:
                rolled = simulate_mean(game, trial_policy)
                dev = _max_state_deviation(rolled, nominal)
            except SimulationDivergedError:
                dev = np.inf
            if dev <= cfg.max_step_deviation:
                candidate = rolled
                break
            if eps <= cfg.min_step:
                raise LineSearchError(iteration=it, min_step=cfg.min_step)
            eps *= 0.5

        trace.records.append(
            IterationRecord(
                iteration=it,
                max_deviation=dev,
                step_size=eps,
                agent_costs=evaluate_cost(game, candidate),
            )
        )
        policies = policy_with_nominal(trial_policy, candidate, zero_offsets=True)
        nominal = candidate
        if dev < cfg.convergence_tol:
            trace.converged = True
            return EceSolution(policies=policies, trace=trace)

    raise NonConvergenceError(
        f"no convergence within {cfg.max_iterations} iterations "
        f"(last deviation {trace.records[-1].max_deviation:.3e})",
        trace=trace,
        policies=policies,
    )
