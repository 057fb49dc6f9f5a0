"""File formats: trajectory CSV, policy JSON, weights JSON, trace CSVs.

Trajectory files are flat CSV with header
``trial,t,s_1..s_n,a1_1..a1_m1,...,aN_1..aN_mN``, one row per (trial, time
step), rows sorted by (trial, t) with t = 1..T per trial.  Floats are
written with 17 significant digits so every value round-trips exactly; all
writers are deterministic byte for byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import IngestError
from .game import AffineGaussianPolicySet, Array, Trajectory, TrajectoryBatch


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def trajectory_header(state_dim: int, action_dims: Sequence[int]) -> list[str]:
    cols = ["trial", "t"]
    cols += [f"s_{k + 1}" for k in range(state_dim)]
    for i, m in enumerate(action_dims):
        cols += [f"a{i + 1}_{k + 1}" for k in range(m)]
    return cols


def write_trajectories(path: str | Path, batch: TrajectoryBatch) -> None:
    header = trajectory_header(batch.state_dim, batch.action_dims)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for trial, traj in enumerate(batch):
            for k in range(traj.horizon):
                row = [str(trial), str(k + 1)]
                row += [_fmt(x) for x in traj.states[k]]
                for a in traj.actions:
                    row += [_fmt(x) for x in a[k]]
                writer.writerow(row)


def read_trajectories(
    path: str | Path, state_dim: int, action_dims: Sequence[int]
) -> TrajectoryBatch:
    """Parse and validate a trajectory file against the expected dimensions.

    Raises :class:`IngestError` citing the 1-based file line of the first
    problem: wrong column count, malformed numbers, unsorted or incomplete
    (trial, t) coverage, or non-finite values.
    """
    expected_header = trajectory_header(state_dim, action_dims)
    n_cols = len(expected_header)
    m_offsets = np.cumsum([0] + list(action_dims))
    rows_by_trial: dict[int, list[tuple[int, list[float]]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        if header != expected_header:
            raise IngestError(
                f"{path}: line 1: header mismatch, expected {','.join(expected_header)}"
            )
        prev_key: tuple[int, int] | None = None
        for line_no, row in enumerate(reader, start=2):
            if len(row) != n_cols:
                raise IngestError(
                    f"{path}: line {line_no}: expected {n_cols} columns, got {len(row)}"
                )
            try:
                trial = int(row[0])
                t = int(row[1])
                values = [float(x) for x in row[2:]]
            except ValueError as exc:
                raise IngestError(f"{path}: line {line_no}: {exc}") from None
            if not all(np.isfinite(values)):
                raise IngestError(f"{path}: line {line_no}: non-finite value")
            key = (trial, t)
            if prev_key is not None and key <= prev_key:
                raise IngestError(
                    f"{path}: line {line_no}: rows not sorted by (trial, t)"
                )
            prev_key = key
            rows_by_trial.setdefault(trial, []).append((t, values))
    if not rows_by_trial:
        raise IngestError(f"{path}: no data rows")

    trajectories = []
    horizon = None
    for trial in sorted(rows_by_trial):
        rows = rows_by_trial[trial]
        ts = [t for t, _ in rows]
        if ts != list(range(1, len(rows) + 1)):
            raise IngestError(f"{path}: trial {trial}: time steps must span 1..T")
        if horizon is None:
            horizon = len(rows)
        elif len(rows) != horizon:
            raise IngestError(f"{path}: trial {trial}: inconsistent horizon")
        states = np.array([vals[:state_dim] for _, vals in rows])
        actions = []
        for i, m in enumerate(action_dims):
            lo = state_dim + int(m_offsets[i])
            actions.append(np.array([vals[lo : lo + m] for _, vals in rows]))
        trajectories.append(Trajectory(states=states, actions=tuple(actions)))
    return TrajectoryBatch(tuple(trajectories))


def write_policy(path: str | Path, policies: AffineGaussianPolicySet) -> None:
    """Serialize a policy set (gains, offsets, covariances, nominal) as JSON."""
    doc = {
        "num_agents": policies.num_agents,
        "horizon": policies.horizon,
        "state_dim": policies.state_dim,
        "action_dims": list(policies.action_dims),
        "nominal_states": policies.nominal_states.tolist(),
        "nominal_actions": [a.tolist() for a in policies.nominal_actions],
        "gains": [P.tolist() for P in policies.gains],
        "offsets": [a.tolist() for a in policies.offsets],
        "covariances": [S.tolist() for S in policies.covariances],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def read_policy(path: str | Path) -> AffineGaussianPolicySet:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return AffineGaussianPolicySet(
            gains=tuple(np.asarray(P) for P in doc["gains"]),
            offsets=tuple(np.asarray(a) for a in doc["offsets"]),
            covariances=tuple(np.asarray(S) for S in doc["covariances"]),
            nominal_states=np.asarray(doc["nominal_states"]),
            nominal_actions=tuple(np.asarray(a) for a in doc["nominal_actions"]),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise IngestError(f"{path}: invalid policy file ({exc})") from exc


def write_weights(path: str | Path, weights: Sequence[Array], feature_names) -> None:
    doc = {
        "weights": [np.asarray(w).tolist() for w in weights],
        "feature_names": [list(names) for names in feature_names],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def read_weights(path: str | Path) -> list[Array]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        return [np.asarray(w, dtype=float) for w in doc["weights"]]
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise IngestError(f"{path}: invalid weights file ({exc})") from exc


def write_iteration_trace(path: str | Path, trace, num_agents: int) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["iteration", "max_deviation", "step_size"]
            + [f"cost_agent{i}" for i in range(num_agents)]
        )
        for rec in trace.records:
            writer.writerow(
                [str(rec.iteration), _fmt(rec.max_deviation), _fmt(rec.step_size)]
                + [_fmt(c) for c in rec.agent_costs]
            )


def write_learn_trace(path: str | Path, trace) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "iteration",
                "agent",
                "residual",
                "solver_iterations",
                "effort_floored",
                "feature",
                "weight",
                "gap",
            ]
        )
        for rec in trace.records:
            for k in range(rec.weights.shape[0]):
                writer.writerow(
                    [
                        str(rec.iteration),
                        str(rec.agent),
                        _fmt(rec.residual),
                        str(rec.solver_iterations),
                        str(int(rec.effort_floored)),
                        str(k),
                        _fmt(rec.weights[k]),
                        _fmt(rec.gap[k]),
                    ]
                )


def write_kl_table(path: str | Path, kls: Sequence[Array], feature_names) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["agent", "feature", "kl"])
        for i, vec in enumerate(kls):
            for name, value in zip(feature_names[i], vec):
                writer.writerow([str(i), name, _fmt(value)])


def write_goal_stats(path: str | Path, stats) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["agent", "mean_dist", "std_dist"])
        for i, (mean, std) in enumerate(stats):
            writer.writerow([str(i), _fmt(mean), _fmt(std)])


def write_rmse(path: str | Path, rmse: Array) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "rmse"])
        for k, value in enumerate(rmse):
            writer.writerow([str(k + 1), _fmt(value)])
