"""Dynamics models and the standard model library.

A :class:`DynamicsModel` bundles the drift of the state update

    s_{t+1} = f(t, s_t, a^1_t, ..., a^N_t) + noise

with evaluators for its Jacobians A_t = D_s f and B^j_t = D_{a^j} f at a
point.  Time steps are 1-based everywhere; the drift is applied for
t = 1..T-1 of a horizon-T game.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import numpy.typing as npt

Array = npt.NDArray[np.float64]

StepFn = Callable[[int, Array, Sequence[Array]], Array]
JacobianFn = Callable[[int, Array, Sequence[Array]], tuple[Array, list[Array]]]


@dataclass(frozen=True)
class DynamicsModel:
    """Drift and Jacobian evaluators for the shared state update.

    ``step(t, s, actions)`` returns the next-state mean (length ``state_dim``).
    ``jacobians(t, s, actions)`` returns ``(A, [B_1, ..., B_N])`` with shapes
    (n, n) and (n, m_j), evaluated at the given point.
    """

    state_dim: int
    action_dims: tuple[int, ...]
    step: StepFn
    jacobians: JacobianFn

    @property
    def num_agents(self) -> int:
        return len(self.action_dims)


def finite_difference_jacobians(
    step: StepFn, state_dim: int, action_dims: Sequence[int], h: float = 1e-6
) -> JacobianFn:
    """Build a central-difference Jacobian evaluator for an arbitrary drift."""

    def jacobians(t: int, s: Array, actions: Sequence[Array]):
        A = np.empty((state_dim, state_dim))
        for k in range(state_dim):
            e = np.zeros(state_dim)
            e[k] = h
            A[:, k] = (step(t, s + e, actions) - step(t, s - e, actions)) / (2.0 * h)
        Bs = []
        for j, m in enumerate(action_dims):
            B = np.empty((state_dim, m))
            for k in range(m):
                hi = [a.copy() for a in actions]
                lo = [a.copy() for a in actions]
                hi[j][k] += h
                lo[j][k] -= h
                B[:, k] = (step(t, s, hi) - step(t, s, lo)) / (2.0 * h)
            Bs.append(B)
        return A, Bs

    return jacobians


def linear(A: Array, Bs: Sequence[Array]) -> DynamicsModel:
    """Time-invariant linear drift s' = A s + sum_j B_j a_j."""
    A = np.asarray(A, dtype=float)
    Bs = [np.asarray(B, dtype=float) for B in Bs]
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"A must be square, got {A.shape}")
    for B in Bs:
        if B.ndim != 2 or B.shape[0] != n:
            raise ValueError(f"B block shape {B.shape} inconsistent with state dim {n}")
    action_dims = tuple(B.shape[1] for B in Bs)

    def step(t: int, s: Array, actions: Sequence[Array]) -> Array:
        out = A @ s
        for B, a in zip(Bs, actions):
            out = out + B @ a
        return out

    def jacobians(t: int, s: Array, actions: Sequence[Array]):
        return A, [B.copy() for B in Bs]

    return DynamicsModel(n, action_dims, step, jacobians)


def double_integrator(num_agents: int, dt: float) -> DynamicsModel:
    """Planar point masses under acceleration control (Euler discretization).

    Per-agent state block (x, y, vx, vy), action (ax, ay):

        p' = p + dt * v,    v' = v + dt * a.

    The joint model is linear, so this delegates to :func:`linear`.
    """
    n = 4 * num_agents
    block = np.array(
        [
            [1.0, 0.0, dt, 0.0],
            [0.0, 1.0, 0.0, dt],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    A = np.zeros((n, n))
    Bs = []
    for i in range(num_agents):
        sl = slice(4 * i, 4 * i + 4)
        A[sl, sl] = block
        B = np.zeros((n, 2))
        B[4 * i + 2, 0] = dt
        B[4 * i + 3, 1] = dt
        Bs.append(B)
    return linear(A, Bs)


def unicycle(num_agents: int, dt: float) -> DynamicsModel:
    """Planar unicycles with speed and turn-rate control (Euler discretization).

    Per-agent state block (x, y, theta), action (v, omega):

        x' = x + dt * v cos(theta),  y' = y + dt * v sin(theta),
        theta' = theta + dt * omega.
    """
    n = 3 * num_agents
    action_dims = tuple(2 for _ in range(num_agents))

    def step(t: int, s: Array, actions: Sequence[Array]) -> Array:
        out = s.astype(float).copy()
        for i in range(num_agents):
            x, y, th = s[3 * i : 3 * i + 3]
            v, om = actions[i]
            out[3 * i] = x + dt * v * np.cos(th)
            out[3 * i + 1] = y + dt * v * np.sin(th)
            out[3 * i + 2] = th + dt * om
        return out

    def jacobians(t: int, s: Array, actions: Sequence[Array]):
        A = np.eye(n)
        Bs = []
        for i in range(num_agents):
            th = s[3 * i + 2]
            v = actions[i][0]
            A[3 * i, 3 * i + 2] = -dt * v * np.sin(th)
            A[3 * i + 1, 3 * i + 2] = dt * v * np.cos(th)
            B = np.zeros((n, 2))
            B[3 * i, 0] = dt * np.cos(th)
            B[3 * i + 1, 0] = dt * np.sin(th)
            B[3 * i + 2, 1] = dt
            Bs.append(B)
        return A, Bs

    return DynamicsModel(n, action_dims, step, jacobians)


def position_indices(kind: str, num_agents: int) -> list[Array]:
    """Indices of each agent's position coordinates in the joint state."""
    if kind == "double_integrator":
        return [np.array([4 * i, 4 * i + 1]) for i in range(num_agents)]
    if kind == "unicycle":
        return [np.array([3 * i, 3 * i + 1]) for i in range(num_agents)]
    raise ValueError(f"no canonical position layout for dynamics kind {kind!r}")
