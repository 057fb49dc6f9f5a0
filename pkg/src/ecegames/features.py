"""Cost feature library: reference tracking, control effort, Gaussian proximity.

Each agent's stage cost is a weighted sum of features,
c^i(t, s, a) = w^i . phi^i(t, s, a).  The three feature kinds cover the
synthetic goal-reaching / collision-avoidance experiments:

  * ReferenceTracking: squared distance of the agent's position to a
    per-step reference point (a straight start-to-goal line by default).
  * ControlEffort: squared norm of the agent's own action.
  * GaussianProximity: exp(-||p_i - p_j||^2 / (2 sigma^2)), highest at zero
    separation, in (0, 1].

State features carry analytic gradients and Hessians of their state part so
the induced :class:`~ecegames.game.CostModel` quadratizes exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidWeightError
from .game import Array, CostModel


@dataclass(frozen=True)
class ReferenceTracking:
    """||p_t - ref_t||^2 for one agent's position against a sampled reference."""

    position_index: Array
    reference: Array  # (T, d), one reference point per time step

    name = "tracking"

    def __post_init__(self):
        object.__setattr__(self, "position_index", np.asarray(self.position_index, dtype=int))
        object.__setattr__(self, "reference", np.asarray(self.reference, dtype=float))
        if self.reference.ndim != 2 or self.reference.shape[1] != self.position_index.shape[0]:
            raise ValueError("reference must be (T, d) matching the position indices")

    def value(self, t: int, s: Array, actions) -> float:
        d = s[self.position_index] - self.reference[t - 1]
        return float(d @ d)

    def values(self, states: Array, actions) -> Array:
        d = states[:, self.position_index] - self.reference
        return np.sum(d * d, axis=1)

    def state_gradient(self, t: int, s: Array) -> Array:
        g = np.zeros(s.shape[0])
        g[self.position_index] = 2.0 * (s[self.position_index] - self.reference[t - 1])
        return g

    def state_hessian(self, t: int, s: Array) -> Array:
        H = np.zeros((s.shape[0], s.shape[0]))
        H[self.position_index, self.position_index] = 2.0
        return H


@dataclass(frozen=True)
class ControlEffort:
    """||a^i_t||^2 for the owning agent; purely an action feature."""

    agent: int

    name = "control"

    def value(self, t: int, s: Array, actions) -> float:
        a = actions[self.agent]
        return float(a @ a)

    def values(self, states: Array, actions) -> Array:
        a = actions[self.agent]
        return np.sum(a * a, axis=1)

    def state_gradient(self, t: int, s: Array) -> Array:
        return np.zeros(s.shape[0])

    def state_hessian(self, t: int, s: Array) -> Array:
        return np.zeros((s.shape[0], s.shape[0]))


@dataclass(frozen=True)
class GaussianProximity:
    """exp(-||p_i - p_j||^2 / (2 sigma^2)) between two agents' positions."""

    position_index: Array
    target_index: Array
    sigma: float
    target: int

    def __post_init__(self):
        object.__setattr__(self, "position_index", np.asarray(self.position_index, dtype=int))
        object.__setattr__(self, "target_index", np.asarray(self.target_index, dtype=int))
        if self.sigma <= 0.0:
            raise ValueError("proximity length scale sigma must be positive")

    @property
    def name(self) -> str:
        return f"obstacle{self.target}"

    def _separation(self, s: Array) -> Array:
        return s[self.position_index] - s[self.target_index]

    def value(self, t: int, s: Array, actions) -> float:
        d = self._separation(s)
        return float(np.exp(-(d @ d) / (2.0 * self.sigma**2)))

    def values(self, states: Array, actions) -> Array:
        d = states[:, self.position_index] - states[:, self.target_index]
        return np.exp(-np.sum(d * d, axis=1) / (2.0 * self.sigma**2))

    def state_gradient(self, t: int, s: Array) -> Array:
        d = self._separation(s)
        phi = np.exp(-(d @ d) / (2.0 * self.sigma**2))
        gd = -(phi / self.sigma**2) * d
        g = np.zeros(s.shape[0])
        g[self.position_index] += gd
        g[self.target_index] -= gd
        return g

    def state_hessian(self, t: int, s: Array) -> Array:
        d = self._separation(s)
        sig2 = self.sigma**2
        phi = np.exp(-(d @ d) / (2.0 * sig2))
        # Hessian of phi wrt the separation vector d.
        Hd = (phi / sig2) * (np.outer(d, d) / sig2 - np.eye(d.shape[0]))
        H = np.zeros((s.shape[0], s.shape[0]))
        H[np.ix_(self.position_index, self.position_index)] += Hd
        H[np.ix_(self.target_index, self.target_index)] += Hd
        H[np.ix_(self.position_index, self.target_index)] -= Hd
        H[np.ix_(self.target_index, self.position_index)] -= Hd
        return H


Feature = ReferenceTracking | ControlEffort | GaussianProximity


@dataclass(frozen=True)
class FeatureBasis:
    """Ordered feature lists per agent plus the joint-state position layout."""

    agents: tuple[tuple[Feature, ...], ...]
    position_indices: tuple[Array, ...]

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(tuple(fs) for fs in self.agents))
        object.__setattr__(
            self, "position_indices", tuple(np.asarray(p, dtype=int) for p in self.position_indices)
        )
        if len(self.agents) != len(self.position_indices):
            raise ValueError("one position index array required per agent")

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    def feature_names(self, agent: int) -> list[str]:
        return [f.name for f in self.agents[agent]]


def straight_line_reference(start: Array, goal: Array, horizon: int) -> Array:
    """Reference path sampled uniformly from start to goal over the horizon."""
    start = np.asarray(start, dtype=float)
    goal = np.asarray(goal, dtype=float)
    if horizon == 1:
        return goal[None, :].copy()
    alphas = np.linspace(0.0, 1.0, horizon)
    return start[None, :] + alphas[:, None] * (goal - start)[None, :]


def eval_features(basis: FeatureBasis, trajectory) -> list[Array]:
    """Per-agent vectors of feature sums over the trajectory, sum_t phi^i."""
    out = []
    for feats in basis.agents:
        vals = np.array(
            [np.sum(f.values(trajectory.states, trajectory.actions)) for f in feats]
        )
        out.append(vals)
    return out


def validate_weights(basis: FeatureBasis, weights) -> list[Array]:
    weights = [np.asarray(w, dtype=float) for w in weights]
    if len(weights) != basis.num_agents:
        raise InvalidWeightError("one weight vector required per agent")
    for i, w in enumerate(weights):
        if w.shape != (len(basis.agents[i]),):
            raise InvalidWeightError(
                f"agent {i}: {len(basis.agents[i])} features but {w.shape[0]} weights"
            )
        if not np.all(np.isfinite(w)):
            raise InvalidWeightError(f"agent {i}: weights must be finite")
    return weights


def make_cost_model(
    basis: FeatureBasis, weights, action_dims: tuple[int, ...]
) -> tuple[CostModel, ...]:
    """Cost models c^i = w^i . phi^i with analytic state derivatives.

    The effort weight becomes the own action-cost matrix R^{ii} = w_eff I;
    cross blocks R^{ij} are zero (no feature couples one agent's cost to
    another agent's action).  A non-positive effort weight is rejected since
    it would make the own action cost singular.
    """
    weights = validate_weights(basis, weights)
    models = []
    for i, feats in enumerate(basis.agents):
        w = weights[i]
        effort_weight = sum(
            float(wk) for wk, f in zip(w, feats) if isinstance(f, ControlEffort)
        )
        if effort_weight <= 0.0:
            raise InvalidWeightError(
                f"agent {i}: control-effort weight must be positive, got {effort_weight}"
            )
        pairs = tuple(zip(w, feats))

        def stage_cost(t: int, s: Array, actions, pairs=pairs) -> float:
            return float(sum(wk * f.value(t, s, actions) for wk, f in pairs))

        def state_gradient(t: int, s: Array, pairs=pairs) -> Array:
            g = np.zeros(s.shape[0])
            for wk, f in pairs:
                g += wk * f.state_gradient(t, s)
            return g

        def state_hessian(t: int, s: Array, pairs=pairs) -> Array:
            H = np.zeros((s.shape[0], s.shape[0]))
            for wk, f in pairs:
                H += wk * f.state_hessian(t, s)
            return H

        action_cost = tuple(
            effort_weight * np.eye(m) if j == i else np.zeros((m, m))
            for j, m in enumerate(action_dims)
        )
        models.append(CostModel(stage_cost, state_gradient, state_hessian, action_cost))
    return tuple(models)
