"""Slow, independent reference computations used to cross-check the package."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull


def permutation_w2_squared(X, Y) -> float:
    """Uniform n-point measures: optimal transport is a permutation (Birkhoff)."""
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    n = len(X)
    best = np.inf
    for perm in itertools.permutations(range(n)):
        best = min(best, float(np.mean(np.sum((X - Y[list(perm)]) ** 2, axis=1))))
    return best


def project_on_hull(V, z) -> np.ndarray:
    """Projection of ``z`` on conv(V) by a generic QP in the barycentric weights."""
    V, z = np.asarray(V, float), np.asarray(z, float)
    m = len(V)
    res = minimize(lambda w: np.sum((w @ V - z) ** 2), np.full(m, 1.0 / m),
                   jac=lambda w: 2 * V @ (w @ V - z), bounds=[(0, 1)] * m,
                   constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1, "jac": lambda w: np.ones(m)}],
                   method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
    return res.x @ V


def hull_halfspaces(V) -> tuple[np.ndarray, np.ndarray]:
    """``A z <= b`` description of a full-dimensional hull in dimension 1 or 2."""
    V = np.asarray(V, float)
    if V.shape[1] == 1:
        return np.array([[1.0], [-1.0]]), np.array([V.max(), -V.min()])
    hull = ConvexHull(V)
    return hull.equations[:, :-1], -hull.equations[:, -1]


def preimage_vertices(M, mu, tol=1e-9) -> np.ndarray:
    """Basic feasible solutions of ``{y >= 0, sum y = 1, M y = mu}`` by support enumeration."""
    J = M.shape[1]
    A = np.vstack([np.ones(J), M])
    rhs = np.concatenate([[1.0], mu])
    out = []
    for size in range(1, J + 1):
        for S in itertools.combinations(range(J), size):
            sub = A[:, S]
            if np.linalg.matrix_rank(sub, tol=1e-10) < size:
                continue
            yS, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
            if np.max(np.abs(sub @ yS - rhs)) > tol or np.min(yS) < -tol:
                continue
            y = np.zeros(J)
            y[list(S)] = np.clip(yS, 0, None)
            if not any(np.max(np.abs(y - o)) < 1e-9 for o in out):
                out.append(y)
    return np.array(out)


def simplex_points(n: int, step: float) -> np.ndarray:
    m = int(round(1 / step))
    pts = [c for c in itertools.product(range(m + 1), repeat=n - 1) if sum(c) <= m]
    return np.array([list(c) + [m - sum(c)] for c in pts], dtype=float) / m


def brute_force_partial(payoffs, signal_law, A, b, step=0.01):
    """Grid oracle for ``for all flags exists x: P(x, flag) in {A z <= b}``.

    Flags are the images of a ``step``-grid over the opponent's mixed actions, and
    ``x`` ranges over a ``step``-grid.  Returns ``(margin, slack)``: ``margin`` is the
    largest over flags of the smallest grid violation; ``slack`` bounds how much the
    x-grid can overstate the exact value.  ``margin <= 0`` means every grid flag is
    satisfied; ``margin > slack`` proves a flag with no ``x``.
    """
    payoffs = np.asarray(payoffs, float)
    nI, nJ, _ = payoffs.shape
    M = np.asarray(signal_law, float).transpose(0, 2, 1).reshape(-1, nJ)
    flags = np.unique(np.round(simplex_points(nJ, step) @ M.T, 10), axis=0)
    X = simplex_points(nI, step)
    # columns of W: (preimage vertex v, facet h); entry i is the coefficient of x_i
    blocks, spread = [], 0.0
    for mu in flags:
        ys = preimage_vertices(M, mu)
        W = np.einsum("vj,ijk,hk->ivh", ys, payoffs, A).reshape(nI, -1)
        blocks.append((W, np.tile(b, len(ys))))
        spread = max(spread, float(np.max(W.max(axis=0) - W.min(axis=0))))
    margin = -np.inf
    for W, bb in blocks:
        margin = max(margin, float(np.min(np.max(X @ W - bb, axis=1))))
    # rounding any x to the grid moves at most (nI - 1) step of mass
    return margin, spread * (nI - 1) * step


def matrix_game_value(M) -> float:
    """``min_x max_j (x M)_j`` by a textbook LP."""
    M = np.asarray(M, float)
    n, m = M.shape
    c = np.r_[np.zeros(n), 1.0]
    A_ub = np.c_[M.T, -np.ones(m)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=[np.r_[np.ones(n), 0.0]], b_eq=[1.0],
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    return float(res.fun)
