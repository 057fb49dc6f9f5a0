"""Independently coded reference solvers and derivative checks for the tests.

These deliberately avoid the package's solver internals: the discrete LQR
uses the standard-form Riccati update, the deterministic feedback-Nash
recursion propagates each agent's value in homogeneous coordinates (one
(n+1) x (n+1) matrix per agent instead of separate Z / xi passes), and the
derivative checks are plain central differences.
"""

from __future__ import annotations

import numpy as np


def textbook_lqr(A, B, Q, R, horizon):
    """Finite-horizon discrete LQR gains for cost 1/2 sum (s'Qs + a'Ra).

    Returns (gains, values): gains[k] is K at step k+1 (k = 0..T-2, no gain
    at the terminal step), values[k] is the cost-to-go Hessian Z at step k+1.
    """
    A, B, Q, R = (np.asarray(M, dtype=float) for M in (A, B, Q, R))
    Z = Q.copy()
    gains = []
    values = [Z.copy()]
    for _ in range(horizon - 1):
        K = np.linalg.solve(R + B.T @ Z @ B, B.T @ Z @ A)
        Z = Q + A.T @ Z @ (A - B @ K)
        Z = (Z + Z.T) / 2.0
        gains.append(K)
        values.append(Z.copy())
    gains.reverse()
    values.reverse()
    return gains, values


def deterministic_nash_lq(A, Bs, Qs, ls, Rs, horizon):
    """Feedback-Nash gains and offsets of a deterministic LQ game.

    Stage cost of agent i: 1/2 (s'Q_i s) + l_i's + 1/2 sum_j a_j'R_ij a_j.
    Each agent's cost-to-go is tracked as one homogeneous quadratic
    1/2 [s;1]' M_i [s;1]; the closed loop acts on [s;1] as a single affine
    map, so the backward pass is a congruence transform plus the stage cost.

    Returns (P, alpha): P[i][k] (m_i, n) and alpha[i][k] (m_i,) for
    k = 0..T-1 (terminal entries are zero).
    """
    N = len(Bs)
    n = np.asarray(A).shape[0]
    A = np.asarray(A, dtype=float)
    Bs = [np.asarray(B, dtype=float) for B in Bs]
    m_dims = [B.shape[1] for B in Bs]

    def stage_matrix(i):
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = Qs[i]
        M[:n, n] = ls[i]
        M[n, :n] = ls[i]
        return M

    M_vals = [stage_matrix(i) for i in range(N)]
    P = [[np.zeros((m, n)) for _ in range(horizon)] for m in m_dims]
    alpha = [[np.zeros(m) for _ in range(horizon)] for m in m_dims]

    for k in range(horizon - 2, -1, -1):
        Z = [M[:n, :n] for M in M_vals]
        xi = [M[:n, n] for M in M_vals]
        blocks = [[None] * N for _ in range(N)]
        rhs_gain = []
        rhs_off = []
        for i in range(N):
            for j in range(N):
                blocks[i][j] = Bs[i].T @ Z[i] @ Bs[j]
                if i == j:
                    blocks[i][j] = blocks[i][j] + Rs[i][i]
            rhs_gain.append(Bs[i].T @ Z[i] @ A)
            rhs_off.append(Bs[i].T @ xi[i])
        S = np.block(blocks)
        sol_gain, *_ = np.linalg.lstsq(S, np.vstack(rhs_gain), rcond=None)
        sol_off, *_ = np.linalg.lstsq(S, np.concatenate(rhs_off), rcond=None)
        splits = np.cumsum(m_dims)[:-1]
        P_k = np.split(sol_gain, splits, axis=0)
        a_k = np.split(sol_off, splits)
        for i in range(N):
            P[i][k] = P_k[i]
            alpha[i][k] = a_k[i]

        # Homogeneous-coordinate closed loop: [s;1] -> [F s + beta; 1].
        F = A - sum(Bs[j] @ P_k[j] for j in range(N))
        beta = -sum(Bs[j] @ a_k[j] for j in range(N))
        G = np.zeros((n + 1, n + 1))
        G[:n, :n] = F
        G[:n, n] = beta
        G[n, n] = 1.0
        new_vals = []
        for i in range(N):
            M = G.T @ M_vals[i] @ G + stage_matrix(i)
            for j in range(N):
                aff = np.zeros((m_dims[j], n + 1))
                aff[:, :n] = P_k[j]
                aff[:, n] = a_k[j]
                M = M + aff.T @ Rs[i][j] @ aff
            new_vals.append((M + M.T) / 2.0)
        M_vals = new_vals
    return P, alpha


def central_difference_gradient(fn, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.shape[0]):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def central_difference_jacobian(fn, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fn(x))
    J = np.empty((f0.shape[0], x.shape[0]))
    for k in range(x.shape[0]):
        e = np.zeros_like(x)
        e[k] = h
        J[:, k] = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2.0 * h)
    return J


def central_difference_hessian(fn, x, h=1e-4):
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    H = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            ea = np.zeros(n)
            eb = np.zeros(n)
            ea[a] = h
            eb[b] = h
            H[a, b] = (
                fn(x + ea + eb) - fn(x + ea - eb) - fn(x - ea + eb) + fn(x - ea - eb)
            ) / (4.0 * h * h)
    return H


def relative_error(approx, exact, floor=1e-8):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return float(np.linalg.norm(approx - exact) / max(np.linalg.norm(exact), floor))
