"""Forward simulation of policies: mean rollouts, stochastic sampling, costs.

Sampling is fully seed-driven.  A single trajectory draws, per time step,
first each agent's action noise (in agent order) and then the process noise,
from one `numpy` Generator constructed from the trial seed.  Batches derive
trial seeds as ``base_seed + trial_index``, so any subset of trials can be
reproduced (or computed in parallel) independently of scheduling.
"""

from __future__ import annotations

import numpy as np

from .errors import SimulationDivergedError
from .game import AffineGaussianPolicySet, Array, GameSpec, Trajectory, TrajectoryBatch


def _resolve_initial(game: GameSpec, s1: Array | None) -> Array:
    if s1 is None:
        return game.initial_state.mean.copy()
    s1 = np.asarray(s1, dtype=float)
    if s1.shape != (game.state_dim,):
        raise ValueError(f"initial state must have dimension {game.state_dim}")
    return s1


def simulate_mean(
    game: GameSpec, policies: AffineGaussianPolicySet, s1: Array | None = None
) -> Trajectory:
    """Deterministic rollout applying every policy's mean action.

    Noise and policy covariances are ignored; the result is bitwise
    reproducible.  Raises :class:`SimulationDivergedError` naming the first
    time step at which the state stops being finite.
    """
    T, n = game.horizon, game.state_dim
    if policies.horizon != T or policies.state_dim != n:
        raise ValueError("policy set dimensions do not match the game")
    s = _resolve_initial(game, s1)
    states = np.empty((T, n))
    actions = [np.empty((T, m)) for m in game.action_dims]
    for k in range(T):
        if not np.all(np.isfinite(s)):
            raise SimulationDivergedError(time_step=k + 1)
        states[k] = s
        acts = policies.mean_actions(k, s)
        for i, a in enumerate(acts):
            actions[i][k] = a
        if k + 1 < T:
            s = game.dynamics.step(k + 1, s, acts)
    return Trajectory(states=states, actions=tuple(actions))


def simulate_stochastic(
    game: GameSpec,
    policies: AffineGaussianPolicySet,
    s1: Array | None = None,
    *,
    seed: int,
) -> Trajectory:
    """Sample one trajectory: actions from each agent's Gaussian policy,
    states through the dynamics plus additive process noise.

    Identical seeds produce identical trajectories.  If ``s1`` is omitted it
    is drawn from the game's initial-state distribution (first draw of the
    trial generator).
    """
    T, n = game.horizon, game.state_dim
    if policies.horizon != T or policies.state_dim != n:
        raise ValueError("policy set dimensions do not match the game")
    rng = np.random.default_rng(seed)
    if s1 is None:
        s = game.initial_state.sample(rng)
    else:
        s = _resolve_initial(game, s1)
    factors = policies.covariance_factors
    states = np.empty((T, n))
    actions = [np.empty((T, m)) for m in game.action_dims]
    for k in range(T):
        if not np.all(np.isfinite(s)):
            raise SimulationDivergedError(time_step=k + 1)
        states[k] = s
        means = policies.mean_actions(k, s)
        acts = []
        for i, mu in enumerate(means):
            z = rng.standard_normal(mu.shape[0])
            a = mu + factors[i][k] @ z
            actions[i][k] = a
            acts.append(a)
        if k + 1 < T:
            s = game.dynamics.step(k + 1, s, acts) + game.noise.sample(rng)
    return Trajectory(states=states, actions=tuple(actions), seed=seed)


def rollout_batch(
    game: GameSpec,
    policies: AffineGaussianPolicySet,
    trials: int,
    base_seed: int,
) -> TrajectoryBatch:
    """Sample ``trials`` trajectories with trial seeds ``base_seed + k``."""
    if trials < 1:
        raise ValueError("trials must be positive")
    return TrajectoryBatch(
        tuple(simulate_stochastic(game, policies, seed=base_seed + k) for k in range(trials))
    )


def evaluate_cost(game: GameSpec, trajectory: Trajectory) -> Array:
    """Accumulated raw stage cost per agent, sum_t c^i(t, s_t, a_t)."""
    if trajectory.state_dim != game.state_dim or trajectory.action_dims != game.action_dims:
        raise ValueError("trajectory dimensions do not match the game")
    if trajectory.horizon != game.horizon:
        raise ValueError("trajectory horizon does not match the game")
    totals = np.zeros(game.num_agents)
    for k in range(trajectory.horizon):
        s = trajectory.states[k]
        acts = [a[k] for a in trajectory.actions]
        for i, cost in enumerate(game.costs):
            totals[i] += cost.stage_cost(k + 1, s, acts)
    return totals
