"""Small linear programs: matrix games and max-violation feasibility over a simplex."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .exceptions import InfeasibleError

_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0, None)):
    """HiGHS dual simplex with tight tolerances; raises InfeasibleError unless optimal."""
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method="highs-ds", options=_OPTIONS)
    if res.status == 2:
        raise InfeasibleError("linear program is infeasible")
    if res.status != 0:
        raise InfeasibleError(f"linear program failed: {res.message}")
    return res


def solve_matrix_game(M) -> tuple[float, np.ndarray]:
    """Minimizing row player: ``min_x max_j (x @ M)[j]`` over the simplex.

    Returns ``(value, x)``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n, m = M.shape
    # variables [x, t]; minimize t subject to M^T x - t <= 0
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([M.T, -np.ones((m, 1))])
    A_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    bounds = [(0, None)] * n + [(None, None)]
    res = solve_lp(c, A_ub, np.zeros(m), A_eq, [1.0], bounds)
    x = np.clip(res.x[:n], 0.0, None)
    x /= x.sum()
    return float(np.max(x @ M)), x


def maximin(M) -> tuple[float, np.ndarray]:
    """Maximizing row player: ``max_x min_j (x @ M)[j]``."""
    value, x = solve_matrix_game(-np.asarray(M, dtype=float))
    return -value, x


def min_violation(G, h, G_eq=None, h_eq=None, cap: float = 1.0) -> tuple[float, np.ndarray]:
    """Minimize the largest violation of ``G x <= h`` and ``G_eq x = h_eq`` over the simplex.

    Returns ``(s, x)``; ``s <= 0`` means ``x`` is feasible.  ``s`` is bounded below
    by ``-cap`` so the program stays bounded when there are no constraints.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    n = G.shape[1]
    rows = [np.hstack([G, -np.ones((len(G), 1))])]
    rhs = [h]
    if G_eq is not None and len(G_eq):
        G_eq = np.atleast_2d(np.asarray(G_eq, dtype=float))
        h_eq = np.asarray(h_eq, dtype=float).ravel()
        rows += [np.hstack([G_eq, -np.ones((len(G_eq), 1))]), np.hstack([-G_eq, -np.ones((len(G_eq), 1))])]
        rhs += [h_eq, -h_eq]
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_eq = np.hstack([np.ones((1, n)), np.zeros((1, 1))])
    bounds = [(0, None)] * n + [(-cap, None)]
    res = solve_lp(c, np.vstack(rows), np.concatenate(rhs), A_eq, [1.0], bounds)
    x = np.clip(res.x[:n], 0.0, None)
    x /= x.sum()
    viol = G @ x - h
    if G_eq is not None and len(G_eq):
        viol = np.concatenate([viol, np.abs(G_eq @ x - h_eq)])
    return float(max(res.x[-1], viol.max(initial=-cap))), x
