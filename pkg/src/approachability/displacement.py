"""Convex games and the displacement game.

In the displacement game the state is a measure on (action, opponent-action) pairs
updated by displacement interpolation toward each new outcome.  Starting from Dirac
masses and playing pure points, the state stays a Dirac mass at the running means,
and targets that are Dirac families over a convex polytope reduce projections to
Euclidean ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_point, check_positive_int
from .exceptions import ApproachabilityError, InvalidArgumentError
from .game import Game, flag_of, payoff_vertices
from .geometry import Polytope, polytope_distance
from .grids import APPROACHABLE, NOT_APPROACHABLE, GridVerdict, simplex_grid
from .informative import rho_image
from .lp import min_violation
from .transport import DiscreteMeasure, displacement_interpolate


@dataclass(frozen=True)
class ConvexityReport:
    convex: bool
    counterexample: DiscreteMeasure | None = None
    excess: float = 0.0


def is_convex_game(game: Game, sample_count: int = 200, tol: float = 1e-9, seed=0,
                   max_atoms: int = 3) -> ConvexityReport:
    """Random search for ``q`` with payoff image not inside ``P(E_q[x], E_q[xi])``."""
    rng = np.random.default_rng(seed)
    n_i, n_j = game.num_actions_p1, game.num_actions_p2
    for _ in range(check_positive_int(sample_count, "sample_count")):
        m = int(rng.integers(1, max_atoms + 1))
        xs = rng.dirichlet(np.ones(n_i), m)
        # corners as well as interior points, since violations tend to sit on faces
        if rng.random() < 0.5:
            xs = np.eye(n_i)[rng.integers(n_i, size=m)]
        ys = rng.dirichlet(np.ones(n_j) * 0.5, m)
        flags = np.array([flag_of(game, y).vector for y in ys])
        w = rng.dirichlet(np.ones(m))
        q = DiscreteMeasure(np.hstack([xs, flags]), w)
        image = rho_image(game, q)
        ex, exi = w @ xs, w @ flags
        target = Polytope(payoff_vertices(game, ex, exi))
        excess = max(target.distance(v) for v in image.vertices)
        if excess > tol:
            return ConvexityReport(False, q, excess)
    return ConvexityReport(True)


@dataclass
class DisplacementTarget:
    """Dirac family ``{delta_c : c in D}`` inside the product of action polytopes ``X`` and ``Xi``."""

    X: Polytope
    Xi: Polytope
    D: Polytope

    def __post_init__(self):
        if self.D.dim != self.X.dim + self.Xi.dim:
            raise InvalidArgumentError("D must live in the product of the X and Xi spaces")

    @property
    def dx(self) -> int:
        return self.X.dim

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.X.diameter, self.Xi.diameter))

    @classmethod
    def from_json(cls, data: dict) -> "DisplacementTarget":
        def poly(spec):
            if isinstance(spec, dict) and "halfspaces" in spec:
                A = [h["a"] for h in spec["halfspaces"]]
                b = [h["b"] for h in spec["halfspaces"]]
                return Polytope.from_halfspaces(A, b)
            if isinstance(spec, dict):
                return Polytope(spec["vertices"])
            return Polytope(spec)
        return cls(poly(data["X"]), poly(data["Xi"]), poly(data["D"]))


@dataclass
class HatState:
    """Dirac state ``delta_(x_bar, y_bar)``; running means are kept as compensated sums."""

    x_bar: np.ndarray
    y_bar: np.ndarray
    n: int = 0
    _sx: np.ndarray = field(default=None, repr=False)
    _sy: np.ndarray = field(default=None, repr=False)
    _cx: np.ndarray = field(default=None, repr=False)
    _cy: np.ndarray = field(default=None, repr=False)

    @classmethod
    def empty(cls, dx: int, dy: int) -> "HatState":
        z = np.zeros
        return cls(z(dx), z(dy), 0, z(dx), z(dy), z(dx), z(dy))

    @property
    def point(self) -> np.ndarray:
        return np.concatenate([self.x_bar, self.y_bar])

    @property
    def theta_hat(self) -> DiscreteMeasure:
        return DiscreteMeasure.dirac(self.point)


def _kahan(total, comp, v):
    y = v - comp
    t = total + y
    return t, (t - total) - y


def hat_update(state: HatState, x_new, y_new, verify: bool = False) -> HatState:
    """Interpolate the Dirac state toward ``(x_new, y_new)`` at time ``1/(n+1)``."""
    x_new = as_point(x_new, dim=len(state.x_bar), name="x_new")
    y_new = as_point(y_new, dim=len(state.y_bar), name="y_new")
    sx, cx = _kahan(state._sx, state._cx, x_new)
    sy, cy = _kahan(state._sy, state._cy, y_new)
    n = state.n + 1
    new = HatState(sx / n, sy / n, n, sx, sy, cx, cy)
    if verify and state.n > 0:
        general = displacement_interpolate(state.theta_hat, DiscreteMeasure.dirac(np.concatenate([x_new, y_new])),
                                           1.0 / n)
        if len(general) != 1 or np.max(np.abs(general.atoms[0] - new.point)) > 1e-12:
            raise ApproachabilityError("general interpolation path disagrees with the running means")
    return new


def gradient_normal_inner(theta_under: DiscreteMeasure, pbar, x, y) -> float:
    """``sum_z w(z) <pbar(z), z - (x, y)>`` over the atoms of ``theta_under``."""
    point = np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(y, dtype=float))])
    if len(point) != theta_under.dim:
        raise InvalidArgumentError(f"(x, y) has dimension {len(point)}, atoms have {theta_under.dim}")
    if callable(pbar):
        field_vals = np.array([pbar(z) for z in theta_under.atoms], dtype=float)
    else:
        field_vals = np.atleast_2d(np.asarray(pbar, dtype=float))
    if field_vals.shape != theta_under.atoms.shape:
        raise InvalidArgumentError("pbar must give one vector per atom")
    return float(np.sum(theta_under.weights * np.einsum("ad,ad->a", field_vals, theta_under.atoms - point)))


@dataclass(frozen=True)
class HatResponse:
    x: np.ndarray
    slack: float
    projection: np.ndarray
    normal: np.ndarray


def hat_b_responses(points, target: DisplacementTarget):
    """Row-wise :func:`hat_b_response` for states at ``points``; returns ``(xs, slacks, projs, normals)``.

    The objective is separable, so the best ``x`` is the vertex of ``X`` minimizing
    ``<q_x, x>`` (first such vertex on ties) whatever the opponent does.
    """
    points = np.atleast_2d(points)
    projs = target.D.project_many(points)
    q = points - projs
    dx = target.dx
    VX, VY = target.X.vertices, target.Xi.vertices
    scores = q[:, :dx] @ VX.T
    k = np.argmin(scores, axis=1)
    rows = np.arange(len(points))
    slacks = scores[rows, k] + np.max(q[:, dx:] @ VY.T, axis=1) - np.einsum("bd,bd->b", q, projs)
    inside = np.linalg.norm(q, axis=1) <= 1e-9
    k[inside] = 0
    slacks[inside] = -np.linalg.norm(q[inside], axis=1)
    return VX[k].copy(), slacks, projs, q


def hat_b_response(state: HatState, target: DisplacementTarget) -> HatResponse:
    """Minimize over ``x`` the worst ``<q, (x, y) - proj>`` with ``q`` the outward normal at the state."""
    xs, slacks, projs, q = hat_b_responses(state.point[None, :], target)
    return HatResponse(xs[0], float(slacks[0]), projs[0], q[0])


@dataclass
class Theorem5Verdict:
    status: str
    witness_y: np.ndarray | None
    delta: float
    grid: GridVerdict

    @property
    def yes(self) -> bool:
        return self.status == APPROACHABLE


def theorem5_check(target: DisplacementTarget, grid_density: int, tol: float = 1e-9) -> Theorem5Verdict:
    """Decide ``for all y in Xi exists x in X: (x, y) in D``.

    The set of ``y`` admitting some ``x`` is a linear image of the convex set
    ``D n (X x Xi)``, hence convex, so the claim holds iff it holds at the vertices of
    ``Xi``; these are points of every grid.  The remaining grid points supply the
    response table and, when the claim fails, the witness of largest violation.
    Responses are barycentric weights over the vertices of ``X``.
    """
    VX, VY = target.X.vertices, target.Xi.vertices
    D, dx = target.D, target.dx
    GX = D.A[:, :dx] @ VX.T
    GX_eq = D.A_eq[:, :dx] @ VX.T if len(D.A_eq) else None

    responses, worst = {}, None
    for lam in simplex_grid(len(VY), grid_density):
        y = lam @ VY
        h = D.b - D.A[:, dx:] @ y
        h_eq = D.b_eq - D.A_eq[:, dx:] @ y if GX_eq is not None else None
        if len(GX) == 0 and GX_eq is None:
            s, mu = -1.0, np.eye(len(VX))[0]
        else:
            s, mu = min_violation(GX, h, GX_eq, h_eq)
        responses[tuple(np.round(lam, 12))] = mu
        if s > tol and (worst is None or s > worst[0]):
            worst = (s, lam)
    if worst is None:
        return Theorem5Verdict(APPROACHABLE, None, 0.0, GridVerdict(APPROACHABLE, responses=responses))
    y = worst[1] @ VY
    slab = Polytope(np.hstack([VX, np.tile(y, (len(VX), 1))]))
    grid = GridVerdict(NOT_APPROACHABLE, worst[1], worst[0], responses)
    return Theorem5Verdict(NOT_APPROACHABLE, y, polytope_distance(slab, D), grid)
