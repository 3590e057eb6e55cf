"""Simplex grids and certification of "for every point of a simplex there is a response" claims.

A claim is checked in two passes.  First every point of a uniform simplex grid is
tested; a point with strictly positive infeasibility is an exact witness against
the claim.  Otherwise the simplex is covered by cells, refined by longest-edge
bisection, and a cell is certified when one response is feasible at all of its
vertices at once (the constraints are affine in the point, so that response then
works on the whole cell).  Cells still uncertified at the refinement cap are
reported as an undetermined band instead of guessing.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._validation import check_positive_int

APPROACHABLE = "approachable"
NOT_APPROACHABLE = "not_approachable"
UNDETERMINED = "undetermined-band"


def simplex_grid(n: int, density: int) -> np.ndarray:
    """All points of the probability simplex in R^n with coordinates in (1/density)Z, lexicographic."""
    n = check_positive_int(n, "n")
    density = check_positive_int(density, "density")
    pts = []
    for head in itertools.product(range(density + 1), repeat=n - 1):
        if sum(head) <= density:
            pts.append(head + (density - sum(head),))
    return np.array(pts, dtype=float) / density


@dataclass
class GridVerdict:
    status: str
    witness: np.ndarray | None = None
    margin: float = 0.0
    responses: dict = field(default_factory=dict)
    band: list = field(default_factory=list)
    n_cells: int = 0

    @property
    def approachable(self) -> bool:
        return self.status == APPROACHABLE

    def response_at(self, point) -> np.ndarray | None:
        return self.responses.get(_key(point))


def _key(point) -> tuple:
    return tuple(np.round(np.asarray(point, dtype=float), 12))


def certify_simplex(
    n: int,
    density: int,
    check: Callable[[np.ndarray], tuple[float, np.ndarray]],
    depth_cap: int = 3,
    tol: float = 1e-9,
) -> GridVerdict:
    """Certify ``for all lam in simplex(n) exists response`` with ``check``.

    ``check(points)`` receives an ``(m, n)`` array of barycentric points and returns
    ``(s, response)`` with ``s`` the least achievable worst violation of one response
    over all of them.
    """
    grid = simplex_grid(n, density)
    responses = {}
    witnesses = []
    for pt in grid:
        s, resp = check(pt[None, :])
        responses[_key(pt)] = resp
        if s > tol:
            witnesses.append((s, pt))
    if witnesses:
        best = max(witnesses, key=lambda w: w[0])
        return GridVerdict(NOT_APPROACHABLE, best[1], best[0], responses)

    min_edge = np.sqrt(2.0) / (density * 2 ** depth_cap)
    band = []
    n_cells = 0
    stack = [np.eye(n)]
    while stack:
        cell = stack.pop()
        n_cells += 1
        s, _ = check(cell)
        if s <= tol:
            continue
        diffs = cell[:, None, :] - cell[None, :, :]
        lengths = np.sqrt((diffs ** 2).sum(-1))
        a, b = np.unravel_index(np.argmax(lengths), lengths.shape)
        if lengths[a, b] <= min_edge:
            band.append(cell)
            continue
        mid = 0.5 * (cell[a] + cell[b])
        s_mid, resp = check(mid[None, :])
        if s_mid > tol:
            return GridVerdict(NOT_APPROACHABLE, mid, s_mid, responses, n_cells=n_cells)
        left, right = cell.copy(), cell.copy()
        left[b] = mid
        right[a] = mid
        stack.extend([right, left])
    if band:
        return GridVerdict(UNDETERMINED, None, 0.0, responses, band, n_cells)
    return GridVerdict(APPROACHABLE, None, 0.0, responses, [], n_cells)
