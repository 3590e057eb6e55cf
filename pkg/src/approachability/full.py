"""Blackwell approachability when Player 1 observes the opponent's actions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int, check_probability
from .exceptions import InvalidArgumentError, InvalidWitnessError
from .game import Game
from .geometry import Polytope, TargetSet, distance_and_projection, polytope_distance
from .grids import NOT_APPROACHABLE, GridVerdict, certify_simplex
from .lp import min_violation, solve_matrix_game


@dataclass(frozen=True)
class ResponseCertificate:
    x_star: np.ndarray
    p: np.ndarray
    q: np.ndarray
    slack: float

    def certifies(self, tol: float = 1e-9) -> bool:
        return self.slack <= tol


def _as_target(target) -> TargetSet:
    if isinstance(target, TargetSet):
        return target
    if isinstance(target, Polytope):
        return TargetSet.convex(target)
    raise InvalidArgumentError("target must be a TargetSet or Polytope")


def _as_polytope(C) -> Polytope:
    if isinstance(C, Polytope):
        return C
    if isinstance(C, TargetSet):
        return C.polytope
    raise InvalidArgumentError("C must be a convex Polytope")


def b_set_response(game: Game, target, z) -> ResponseCertificate:
    """Mixed action solving ``min_x max_j <rho(x, j) - p, z - p>`` for the best projection ``p``."""
    target = _as_target(target)
    if target.dim != game.payoff_dim:
        raise InvalidArgumentError("target dimension differs from the payoff dimension")
    z = np.asarray(z, dtype=float)
    dist, projs = distance_and_projection(target, z)
    first = np.zeros(game.num_actions_p1)
    first[0] = 1.0
    if dist <= 1e-9:
        return ResponseCertificate(first, z.copy(), np.zeros_like(z), -dist)
    best = None
    for p in projs:
        q = z - p
        M = (game.payoffs - p) @ q
        value, x = solve_matrix_game(M)
        if best is None or value < best.slack - 1e-12:
            best = ResponseCertificate(x, p, q, value)
    return best


def blackwell_step(game: Game, target, running_mean, n: int) -> np.ndarray:
    """Stage-``n`` action; ``running_mean=None`` at stage 1 responds to the (first, first) payoff."""
    check_positive_int(n, "n")
    if running_mean is None:
        running_mean = game.payoffs[0, 0]
    return b_set_response(game, target, running_mean).x_star


def _feasibility_rows(game: Game, C: Polytope, ys: np.ndarray):
    """Constraints on x stating ``rho(x, y) in C`` for every row ``y`` of ``ys``."""
    G, h, G_eq, h_eq = [], [], [], []
    for y in ys:
        R = np.einsum("j,ijk->ki", y, game.payoffs)
        G.append(C.A @ R)
        h.append(C.b)
        if len(C.A_eq):
            G_eq.append(C.A_eq @ R)
            h_eq.append(C.b_eq)
    n = game.num_actions_p1
    G = np.vstack(G) if G else np.zeros((0, n))
    h = np.concatenate(h) if h else np.zeros(0)
    if G_eq:
        return G, h, np.vstack(G_eq), np.concatenate(h_eq)
    return G, h, None, None


def feasibility_check(game: Game, C: Polytope):
    """``check(ys)`` returning the least worst violation of ``rho(x, y) in C`` over rows of ys."""
    def check(ys):
        G, h, G_eq, h_eq = _feasibility_rows(game, C, ys)
        if len(G) == 0 and G_eq is None:
            x = np.zeros(game.num_actions_p1)
            x[0] = 1.0
            return -1.0, x
        return min_violation(G, h, G_eq, h_eq)
    return check


@dataclass
class FullVerdict:
    status: str
    witness_y: np.ndarray | None
    margin: float
    grid: GridVerdict

    @property
    def approachable(self) -> bool:
        return self.grid.approachable

    def witness_x(self, y) -> np.ndarray | None:
        return self.grid.response_at(y)


def exclusion_margin(game: Game, C, y) -> float:
    """``min_x d(rho(x, y), C)``: distance between the payoff polytope against ``y`` and ``C``."""
    C = _as_polytope(C)
    y = check_probability(y, game.num_actions_p2, "y")
    rows = np.einsum("j,ijk->ik", y, game.payoffs)
    return polytope_distance(Polytope(rows), C)


def convex_approachable_full(game: Game, C, grid_density: int, depth_cap: int = 3,
                             tol: float = 1e-9) -> FullVerdict:
    """Grid certification of ``for all y exists x: rho(x, y) in C`` (signals are ignored)."""
    C = _as_polytope(C)
    grid = certify_simplex(game.num_actions_p2, grid_density, feasibility_check(game, C), depth_cap, tol)
    if grid.status == NOT_APPROACHABLE:
        y = grid.witness
        return FullVerdict(grid.status, y, exclusion_margin(game, C, y), grid)
    return FullVerdict(grid.status, None, 0.0, grid)


@dataclass(frozen=True)
class StationaryStrategy:
    """Player 2 replays one mixed action at every stage."""

    y: np.ndarray
    margin: float

    def __call__(self, *_args, **_kw) -> np.ndarray:
        return self.y


def exclusion_strategy(game: Game, C, witness_y) -> StationaryStrategy:
    y = check_probability(witness_y, game.num_actions_p2, "witness_y")
    delta = exclusion_margin(game, C, y)
    if delta <= 1e-12:
        raise InvalidWitnessError(f"witness keeps payoffs at distance {delta:.3g} from C; no exclusion")
    return StationaryStrategy(y, delta)
