"""Domain types for finite-horizon stochastic dynamic games.

All agents observe the joint state s_t in R^n; agent i applies action
a^i_t in R^{m_i}.  The state advances through a shared drift with additive
Gaussian noise,

    s_{t+1} = f(t, s_t, a^1_t, ..., a^N_t) + G w_t,    w_t ~ N(0, W),

for 1-based time steps t = 1..T (the drift acts for t < T).  Each agent
accumulates a separable per-stage cost

    c^i(t, s_t, a_t) = v^i(t, s_t) + sum_j a^j_t' R^{ij} a^j_t,

encoded by :class:`CostModel` as a black-box stage evaluator together with
analytic derivatives of the state part v^i and the exact action matrices
R^{ij}.  Policies are per-agent, per-step affine-Gaussian feedback laws
expressed around a nominal trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt

from .dynamics import DynamicsModel
from .errors import CovarianceError

Array = npt.NDArray[np.float64]

StageCostFn = Callable[[int, Array, Sequence[Array]], float]
StateDerivFn = Callable[[int, Array], Array]

_SYM_TOL = 1e-9


def _check_symmetric(M: Array, name: str, tol: float = _SYM_TOL) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.allclose(M, M.T, atol=tol, rtol=0.0):
        raise ValueError(f"{name} is not symmetric")


def psd_factor(M: Array) -> Array:
    """Square root L with L L' = M for a symmetric PSD matrix (eigh-based).

    Tolerates exact zeros and tiny negative eigenvalues from rounding, which a
    Cholesky factorization would reject.
    """
    if M.size == 0:
        return M.reshape(M.shape)
    w, V = np.linalg.eigh((M + M.T) / 2.0)
    if np.min(w, initial=0.0) < -1e-10 * max(1.0, float(np.max(np.abs(w), initial=0.0))):
        raise ValueError("matrix is not positive semi-definite")
    return V * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian process noise G w_t with w_t ~ N(0, W).

    The gain is a constant (n, n_w) matrix; W must be symmetric PSD
    (identity by default, and W = 0 or n_w = 0 disable the noise).
    """

    gain: Array
    covariance: Array

    def __post_init__(self):
        object.__setattr__(self, "gain", np.asarray(self.gain, dtype=float))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))
        if self.gain.ndim != 2:
            raise ValueError("noise gain must be a matrix")
        n_w = self.gain.shape[1]
        if self.covariance.shape != (n_w, n_w):
            raise ValueError(
                f"noise covariance shape {self.covariance.shape} does not match gain width {n_w}"
            )
        if n_w:
            _check_symmetric(self.covariance, "noise covariance")
        psd_factor(self.covariance)  # raises if not PSD

    @classmethod
    def identity(cls, state_dim: int) -> "NoiseModel":
        return cls(np.eye(state_dim), np.eye(state_dim))

    @classmethod
    def scaled_identity(cls, state_dim: int, scale: float) -> "NoiseModel":
        return cls(scale * np.eye(state_dim), np.eye(state_dim))

    @classmethod
    def none(cls, state_dim: int) -> "NoiseModel":
        return cls(np.zeros((state_dim, 0)), np.zeros((0, 0)))

    @cached_property
    def _factor(self) -> Array:
        # gain @ chol(W): one matrix applied to standard normals per step.
        return self.gain @ psd_factor(self.covariance)

    def sample(self, rng: np.random.Generator) -> Array:
        return self._factor @ rng.standard_normal(self.gain.shape[1])


@dataclass(frozen=True)
class InitialState:
    """Fixed or Gaussian distribution of the initial joint state."""

    mean: Array
    covariance: Array | None = None

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        if self.covariance is not None:
            cov = np.asarray(self.covariance, dtype=float)
            object.__setattr__(self, "covariance", cov)
            n = self.mean.shape[0]
            if cov.shape != (n, n):
                raise ValueError("initial-state covariance shape mismatch")
            _check_symmetric(cov, "initial-state covariance")
            psd_factor(cov)

    @cached_property
    def _factor(self) -> Array | None:
        return None if self.covariance is None else psd_factor(self.covariance)

    def sample(self, rng: np.random.Generator) -> Array:
        if self._factor is None:
            return self.mean.copy()
        return self.mean + self._factor @ rng.standard_normal(self.mean.shape[0])


@dataclass(frozen=True)
class CostModel:
    """Separable per-stage cost of one agent.

    ``stage_cost(t, s, actions)`` evaluates c(t, s, a) = v(t, s) +
    sum_j a_j' R_j a_j.  ``state_gradient`` / ``state_hessian`` evaluate
    D_s v and D_ss v; ``action_cost`` holds the R_j matrices (own block
    positive definite, cross blocks PSD, enforced at game construction).
    """

    stage_cost: StageCostFn
    state_gradient: StateDerivFn
    state_hessian: StateDerivFn
    action_cost: tuple[Array, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "action_cost", tuple(np.asarray(R, dtype=float) for R in self.action_cost)
        )
        for j, R in enumerate(self.action_cost):
            _check_symmetric(R, f"action cost block R[{j}]")


def quadratic_cost(Q: Array, l: Array, Rs: Sequence[Array]) -> CostModel:
    """Cost model for the quadratic stage cost 1/2 s'Qs + l's + 1/2 sum_j a_j'R_j a_j.

    ``Rs`` follows the half-quadratic convention of the LQ stage-game solver;
    the stored action matrices are Rs/2 so that the :class:`CostModel`
    decomposition (which carries no 1/2 on the action term) evaluates the
    same function.
    """
    Q = np.asarray(Q, dtype=float)
    l = np.asarray(l, dtype=float)
    Rs = [np.asarray(R, dtype=float) for R in Rs]
    _check_symmetric(Q, "Q")

    def stage_cost(t: int, s: Array, actions: Sequence[Array]) -> float:
        c = 0.5 * s @ Q @ s + l @ s
        for R, a in zip(Rs, actions):
            c += 0.5 * a @ R @ a
        return float(c)

    def state_gradient(t: int, s: Array) -> Array:
        return Q @ s + l

    def state_hessian(t: int, s: Array) -> Array:
        return Q.copy()

    return CostModel(stage_cost, state_gradient, state_hessian, tuple(0.5 * R for R in Rs))


@dataclass(frozen=True)
class GameSpec:
    """A finite-horizon game: shared dynamics, per-agent costs, noise, horizon."""

    dynamics: DynamicsModel
    costs: tuple[CostModel, ...]
    horizon: int
    noise: NoiseModel
    initial_state: InitialState
    temperatures: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "costs", tuple(self.costs))
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        n_agents = self.dynamics.num_agents
        if len(self.costs) != n_agents:
            raise ValueError("one cost model required per agent")
        if not self.temperatures:
            object.__setattr__(self, "temperatures", tuple(1.0 for _ in range(n_agents)))
        else:
            object.__setattr__(self, "temperatures", tuple(float(g) for g in self.temperatures))
        if len(self.temperatures) != n_agents:
            raise ValueError("one temperature required per agent")
        if any(g <= 0.0 for g in self.temperatures):
            raise ValueError("temperatures must be positive")
        if self.noise.gain.shape[0] != self.dynamics.state_dim:
            raise ValueError("noise gain row count must equal the state dimension")
        if self.initial_state.mean.shape != (self.dynamics.state_dim,):
            raise ValueError("initial state dimension mismatch")
        for i, cost in enumerate(self.costs):
            if len(cost.action_cost) != n_agents:
                raise ValueError(f"cost model {i} must carry one action block per agent")
            for j, R in enumerate(cost.action_cost):
                m = self.dynamics.action_dims[j]
                if R.shape != (m, m):
                    raise ValueError(f"R[{i}][{j}] shape {R.shape} != ({m}, {m})")
            own = cost.action_cost[i]
            if np.min(np.linalg.eigvalsh(own)) <= 0.0:
                raise ValueError(f"own action cost R[{i}][{i}] must be positive definite")

    @property
    def num_agents(self) -> int:
        return self.dynamics.num_agents

    @property
    def state_dim(self) -> int:
        return self.dynamics.state_dim

    @property
    def action_dims(self) -> tuple[int, ...]:
        return self.dynamics.action_dims


@dataclass(frozen=True)
class Trajectory:
    """One joint rollout: states (T, n) and per-agent actions (T, m_i)."""

    states: Array
    actions: tuple[Array, ...]
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))
        object.__setattr__(
            self, "actions", tuple(np.asarray(a, dtype=float) for a in self.actions)
        )
        T = self.states.shape[0]
        if self.states.ndim != 2:
            raise ValueError("states must be (T, n)")
        for a in self.actions:
            if a.ndim != 2 or a.shape[0] != T:
                raise ValueError("every action array must be (T, m_i)")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory contains non-finite states")
        if any(not np.all(np.isfinite(a)) for a in self.actions):
            raise ValueError("trajectory contains non-finite actions")

    @property
    def horizon(self) -> int:
        return self.states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def action_dims(self) -> tuple[int, ...]:
        return tuple(a.shape[1] for a in self.actions)


@dataclass(frozen=True)
class TrajectoryBatch:
    """A set of rollouts sharing dimensions; the unit of demos and samples."""

    trajectories: tuple[Trajectory, ...]

    def __post_init__(self):
        object.__setattr__(self, "trajectories", tuple(self.trajectories))
        if not self.trajectories:
            raise ValueError("trajectory batch may not be empty")
        first = self.trajectories[0]
        for traj in self.trajectories[1:]:
            if (
                traj.horizon != first.horizon
                or traj.state_dim != first.state_dim
                or traj.action_dims != first.action_dims
            ):
                raise ValueError("trajectories in a batch must share dimensions")

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    def __getitem__(self, idx: int) -> Trajectory:
        return self.trajectories[idx]

    @property
    def horizon(self) -> int:
        return self.trajectories[0].horizon

    @property
    def state_dim(self) -> int:
        return self.trajectories[0].state_dim

    @property
    def action_dims(self) -> tuple[int, ...]:
        return self.trajectories[0].action_dims

    @property
    def num_agents(self) -> int:
        return len(self.action_dims)


@dataclass(frozen=True)
class AffineGaussianPolicySet:
    """Per-agent, per-step policies a ~ N(abar_t - P_t (s - sbar_t) - alpha_t, Sigma_t).

    Gains are (T, m_i, n), offsets (T, m_i) and covariances (T, m_i, m_i) per
    agent.  The nominal trajectory (sbar, abar) anchors the feedback; direct
    solutions of linear-quadratic games use an all-zero nominal so the law
    reduces to a = -P s - alpha.
    """

    gains: tuple[Array, ...]
    offsets: tuple[Array, ...]
    covariances: tuple[Array, ...]
    nominal_states: Array
    nominal_actions: tuple[Array, ...]

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(np.asarray(g, dtype=float) for g in self.gains))
        object.__setattr__(self, "offsets", tuple(np.asarray(a, dtype=float) for a in self.offsets))
        object.__setattr__(
            self, "covariances", tuple(np.asarray(S, dtype=float) for S in self.covariances)
        )
        object.__setattr__(self, "nominal_states", np.asarray(self.nominal_states, dtype=float))
        object.__setattr__(
            self, "nominal_actions", tuple(np.asarray(a, dtype=float) for a in self.nominal_actions)
        )
        T, n = self.nominal_states.shape
        if not len(self.gains) == len(self.offsets) == len(self.covariances) == len(
            self.nominal_actions
        ):
            raise ValueError("per-agent field lengths disagree")
        for i, (P, al, S, ab) in enumerate(
            zip(self.gains, self.offsets, self.covariances, self.nominal_actions)
        ):
            m = P.shape[1]
            if P.shape != (T, m, n) or al.shape != (T, m) or S.shape != (T, m, m) or ab.shape != (
                T,
                m,
            ):
                raise ValueError(f"inconsistent shapes for agent {i}")

    @property
    def horizon(self) -> int:
        return self.nominal_states.shape[0]

    @property
    def state_dim(self) -> int:
        return self.nominal_states.shape[1]

    @property
    def num_agents(self) -> int:
        return len(self.gains)

    @property
    def action_dims(self) -> tuple[int, ...]:
        return tuple(P.shape[1] for P in self.gains)

    @classmethod
    def identity_nominal(cls, gains, offsets, covariances) -> "AffineGaussianPolicySet":
        """Policies around the all-zero nominal, i.e. a = -P s - alpha."""
        T = np.asarray(gains[0]).shape[0]
        n = np.asarray(gains[0]).shape[2]
        return cls(
            gains=tuple(gains),
            offsets=tuple(offsets),
            covariances=tuple(covariances),
            nominal_states=np.zeros((T, n)),
            nominal_actions=tuple(np.zeros((T, np.asarray(P).shape[1])) for P in gains),
        )

    @classmethod
    def zero(cls, horizon: int, state_dim: int, action_dims: Sequence[int]):
        """All-zero feedback (unit covariances); the cold-start iterate."""
        return cls.identity_nominal(
            gains=[np.zeros((horizon, m, state_dim)) for m in action_dims],
            offsets=[np.zeros((horizon, m)) for m in action_dims],
            covariances=[np.tile(np.eye(m), (horizon, 1, 1)) for m in action_dims],
        )

    def mean_actions(self, k: int, s: Array) -> list[Array]:
        """Mean actions of all agents at 0-based step index k in state s."""
        ds = s - self.nominal_states[k]
        return [
            self.nominal_actions[i][k] - self.gains[i][k] @ ds - self.offsets[i][k]
            for i in range(self.num_agents)
        ]

    @cached_property
    def covariance_factors(self) -> tuple[Array, ...]:
        """Cholesky factors of every Sigma_t^i, computed once per policy set."""
        out = []
        for i, S in enumerate(self.covariances):
            L = np.empty_like(S)
            for k in range(S.shape[0]):
                sym = (S[k] + S[k].T) / 2.0
                try:
                    L[k] = np.linalg.cholesky(sym)
                except np.linalg.LinAlgError as exc:
                    raise CovarianceError(
                        f"policy covariance not positive definite for agent {i} at t={k + 1}",
                        agent=i,
                        time_step=k + 1,
                    ) from exc
            out.append(L)
        return tuple(out)

    def as_absolute(self) -> tuple[list[Array], list[Array]]:
        """Re-express the policy means as a = -P s - alpha_abs (no nominal).

        Useful for comparing policies computed around different nominals.
        """
        alphas = []
        for i in range(self.num_agents):
            al = np.empty_like(self.offsets[i])
            for k in range(self.horizon):
                al[k] = (
                    self.offsets[i][k]
                    - self.nominal_actions[i][k]
                    - self.gains[i][k] @ self.nominal_states[k]
                )
            alphas.append(al)
        return [P.copy() for P in self.gains], alphas


def pin_other_agents(
    game: GameSpec, agent: int, replay_actions: Sequence[Array]
) -> tuple[GameSpec, Callable[[Trajectory], Trajectory]]:
    """Reduce a game to a single decision maker with the rest on open-loop replay.

    Agent ``agent`` keeps its cost and action channel; every other agent's
    action at step t is pinned to ``replay_actions[j][t-1]``.  Returns the
    reduced single-agent game (full joint state retained) and an embedding
    that rebuilds a joint trajectory from a single-agent rollout by
    re-inserting the replayed actions.
    """
    N = game.num_agents
    if not 0 <= agent < N:
        raise ValueError(f"agent index {agent} out of range")
    replay = [np.asarray(a, dtype=float) for a in replay_actions]
    if len(replay) != N:
        raise ValueError("one replay action array required per agent (own entry ignored)")
    for j, a in enumerate(replay):
        if j != agent and a.shape != (game.horizon, game.action_dims[j]):
            raise ValueError(f"replay action shape mismatch for agent {j}")

    if N == 1:
        return game, lambda traj: traj

    dyn = game.dynamics

    def expand(t: int, a: Array) -> list[Array]:
        acts = [replay[j][t - 1] for j in range(N)]
        acts[agent] = a
        return acts

    def step(t: int, s: Array, actions: Sequence[Array]) -> Array:
        return dyn.step(t, s, expand(t, actions[0]))

    def jacobians(t: int, s: Array, actions: Sequence[Array]):
        A, Bs = dyn.jacobians(t, s, expand(t, actions[0]))
        return A, [Bs[agent]]

    cost = game.costs[agent]

    def stage_cost(t: int, s: Array, actions: Sequence[Array]) -> float:
        return cost.stage_cost(t, s, expand(t, actions[0]))

    reduced_cost = CostModel(
        stage_cost=stage_cost,
        state_gradient=cost.state_gradient,
        state_hessian=cost.state_hessian,
        action_cost=(cost.action_cost[agent],),
    )
    reduced = GameSpec(
        dynamics=DynamicsModel(dyn.state_dim, (dyn.action_dims[agent],), step, jacobians),
        costs=(reduced_cost,),
        horizon=game.horizon,
        noise=game.noise,
        initial_state=game.initial_state,
        temperatures=(game.temperatures[agent],),
    )

    def embed(traj: Trajectory) -> Trajectory:
        actions = [replay[j].copy() for j in range(N)]
        actions[agent] = traj.actions[0]
        return Trajectory(states=traj.states, actions=tuple(actions), seed=traj.seed)

    return reduced, embed


def policy_with_nominal(
    policies: AffineGaussianPolicySet, nominal: Trajectory, *, zero_offsets: bool = False
) -> AffineGaussianPolicySet:
    """Re-anchor a policy set on a new nominal trajectory."""
    offsets = (
        tuple(np.zeros_like(a) for a in policies.offsets) if zero_offsets else policies.offsets
    )
    return replace(
        policies,
        offsets=offsets,
        nominal_states=nominal.states,
        nominal_actions=nominal.actions,
    )
