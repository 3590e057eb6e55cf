"""The lifted game on measures over (mixed action, flag) pairs, discretized on a product grid.

Player 1 picks a measure over grid mixed actions, Player 2 a measure over grid flags,
and the stage outcome is their product measure.  Targets are classes of measures on
the product grid cut out by linear constraints on the weights, which covers the
preimage of a convex polytope under the set-valued payoff map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ._validation import check_positive_int, check_probability
from .exceptions import ApproachabilityError, InfeasibleError, InvalidArgumentError
from .full import _as_polytope
from .game import Flag, Game, payoff_vertices
from .geometry import Polytope, TargetSet, contains, minkowski_sum
from .grids import simplex_grid
from .lp import maximin, min_violation
from .transport import DiscreteMeasure, LinearConstraints, project_measure, w2

_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class ProductGrid:
    """Grid mixed actions ``grid_X`` (rows in R^|I|) times grid flags ``grid_Xi``.

    Product atom ``(a, b)`` sits at index ``a * n_xi + b`` with coordinates
    ``concat(grid_X[a], grid_Xi[b])``.
    """

    def __init__(self, grid_X, grid_Xi):
        self.grid_X = np.atleast_2d(np.asarray(grid_X, dtype=float))
        self.grid_Xi = np.atleast_2d(np.asarray(grid_Xi, dtype=float))
        self.grid_X.setflags(write=False)
        self.grid_Xi.setflags(write=False)

    @classmethod
    def for_game(cls, game: Game, density: int = 5, xi_density: int | None = None) -> "ProductGrid":
        """Uniform simplex grid over mixed actions and over the hull of the extreme flags."""
        grid_X = simplex_grid(game.num_actions_p1, density)
        lams = simplex_grid(len(game.flag_vertices), xi_density or density)
        flags = lams @ game.flag_vertices
        keys = np.round(flags, 12)
        _, first = np.unique(keys, axis=0, return_index=True)
        return cls(grid_X, flags[np.sort(first)])

    @property
    def n_x(self) -> int:
        return len(self.grid_X)

    @property
    def n_xi(self) -> int:
        return len(self.grid_Xi)

    @property
    def size(self) -> int:
        return self.n_x * self.n_xi

    @cached_property
    def support(self) -> np.ndarray:
        s = np.hstack([np.repeat(self.grid_X, self.n_xi, axis=0), np.tile(self.grid_Xi, (self.n_x, 1))])
        s.setflags(write=False)
        return s

    def measure(self, weights) -> DiscreteMeasure:
        w = np.asarray(weights, dtype=float).ravel()
        return DiscreteMeasure(self.support, w, merge=False)

    def product(self, x_weights, xi_weights) -> DiscreteMeasure:
        return self.measure(np.outer(x_weights, xi_weights))

    def weights_of(self, theta: DiscreteMeasure) -> np.ndarray:
        """Weights of ``theta`` on the grid support (atoms must be grid atoms)."""
        return _weights_on(self.support, theta)

    def nearest_xi(self, flag) -> int:
        vec = flag.vector if isinstance(flag, Flag) else np.asarray(flag, dtype=float).ravel()
        return int(np.argmin(((self.grid_Xi - vec) ** 2).sum(1)))

    def split(self, atom) -> tuple[np.ndarray, np.ndarray]:
        n_i = self.grid_X.shape[1]
        return atom[:n_i], atom[n_i:]


@dataclass
class MeasureTarget:
    grid: ProductGrid
    constraints: LinearConstraints
    description: str = ""

    def __post_init__(self):
        if self.constraints.size != self.grid.size:
            raise InvalidArgumentError("constraints must act on the product-grid weights")
        n = self.grid.size
        c = self.constraints
        G = c.A_ub if len(c.A_ub) else np.zeros((0, n))
        s, _ = min_violation(G, c.b_ub, c.A_eq if len(c.A_eq) else None, c.b_eq)
        if s > 1e-9:
            raise InfeasibleError(f"measure target is empty (least violation {s:.3g})")

    @classmethod
    def everything(cls, grid: ProductGrid) -> "MeasureTarget":
        return cls(grid, LinearConstraints.build(grid.size), "all measures")

    @classmethod
    def linear(cls, grid: ProductGrid, A_ub=None, b_ub=None, A_eq=None, b_eq=None,
               description: str = "linear") -> "MeasureTarget":
        return cls(grid, LinearConstraints.build(grid.size, A_ub, b_ub, A_eq, b_eq), description)

    @classmethod
    def rho_preimage(cls, game: Game, C, grid: ProductGrid) -> "MeasureTarget":
        """Measures whose payoff image (a weighted Minkowski sum) lies in the polytope ``C``.

        Containment is checked facet by facet through support functions, which add
        up under Minkowski sums, so the class is linear in the weights.
        """
        C = _as_polytope(C)
        verts = atom_payoff_vertices(game, grid)
        sup = np.array([[np.max(V @ a) for a in C.A] for V in verts]).T
        A_ub, b_ub = [sup], [C.b]
        if len(C.A_eq):
            hi = np.array([[np.max(V @ a) for a in C.A_eq] for V in verts]).T
            lo = np.array([[np.min(V @ a) for a in C.A_eq] for V in verts]).T
            A_ub += [hi, -lo]
            b_ub += [C.b_eq, -C.b_eq]
        return cls.linear(grid, np.vstack(A_ub), np.concatenate(b_ub), description="rho_preimage")

    def contains_weights(self, w, tol: float = 1e-9) -> bool:
        return self.constraints.satisfied(w, tol)

    def project(self, theta: DiscreteMeasure):
        return project_measure(theta, self.grid.support, self.constraints)

    def distance(self, theta: DiscreteMeasure) -> float:
        return project_measure(theta, self.grid.support, self.constraints)[1].distance


def atom_payoff_vertices(game: Game, grid: ProductGrid) -> list[np.ndarray]:
    """Vertices of ``P(x_a, xi_b)`` for every product atom, in atom order."""
    out = []
    for x in grid.grid_X:
        for flag in grid.grid_Xi:
            out.append(payoff_vertices(game, x, flag))
    return out


def rho_image(game: Game, theta: DiscreteMeasure) -> Polytope:
    """Payoff image of ``theta``: the weighted Minkowski sum of ``P(x, xi)`` over atoms."""
    n_i = game.num_actions_p1
    if theta.dim != n_i + game.flag_dim:
        raise InvalidArgumentError(f"atoms must have dimension {n_i + game.flag_dim}")
    sets, weights = [], []
    for atom, w in zip(theta.atoms, theta.weights):
        if w <= 0:
            continue
        x = np.clip(atom[:n_i], 0.0, None)
        sets.append(payoff_vertices(game, x / x.sum(), atom[n_i:]))
        weights.append(w)
    return Polytope(minkowski_sum(sets, weights))


def rho_preimage_member(game: Game, theta: DiscreteMeasure, E, tol: float = 1e-9) -> bool:
    E = E if isinstance(E, TargetSet) else TargetSet.convex(E)
    return all(contains(E, v, tol) for v in rho_image(game, theta).vertices)


def smooth_with_lambda(theta: DiscreteMeasure, epsilon: float, support=None,
                       iterations: int = 30) -> tuple[DiscreteMeasure, float]:
    """Mix ``theta`` with the uniform measure on ``support`` (default: its own atoms).

    Returns the mixture and ``lam``, the largest value in (0, 1/2] found by bisection
    with ``W2^2(theta, mixture) <= epsilon``.  Convexity of the squared distance along
    the mixture segment makes the map monotone and gives the starting lower bracket.
    """
    if not epsilon > 0:
        raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
    atoms = theta.atoms if support is None else np.asarray(support, dtype=float)
    base_w = theta.weights.copy() if support is None else _weights_on(atoms, theta)
    uniform = np.full(len(atoms), 1.0 / len(atoms))

    def mixed(lam):
        return DiscreteMeasure(atoms, (1 - lam) * base_w + lam * uniform, merge=False)

    def cost(lam):
        return w2(theta, mixed(lam)).squared_cost

    if cost(0.5) <= epsilon:
        return mixed(0.5), 0.5
    full = w2(theta, DiscreteMeasure(atoms, uniform, merge=False)).squared_cost
    lo, hi = min(0.5, epsilon / full) * (1 - 1e-9), 0.5
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if cost(mid) <= epsilon:
            lo = mid
        else:
            hi = mid
    # the bracket is feasible in exact arithmetic only; make sure the LP agrees
    while cost(lo) > epsilon:
        lo *= 0.5
    return mixed(lo), lo


def _weights_on(atoms: np.ndarray, theta: DiscreteMeasure) -> np.ndarray:
    """Weights of ``theta`` on the atom list ``atoms``."""
    if len(theta) == len(atoms) and np.array_equal(theta.atoms, atoms):
        return theta.weights.copy()
    lookup = {tuple(np.round(a, 10)): i for i, a in enumerate(atoms)}
    w = np.zeros(len(atoms))
    for atom, weight in zip(theta.atoms, theta.weights):
        idx = lookup.get(tuple(np.round(atom, 10)))
        if idx is None:
            raise InvalidArgumentError(f"atom {atom} is not in the smoothing support")
        w[idx] += weight
    return w


def smooth(theta: DiscreteMeasure, epsilon: float, support=None, iterations: int = 30) -> DiscreteMeasure:
    return smooth_with_lambda(theta, epsilon, support, iterations)[0]


class KahanSum:
    """Compensated running sum of weight vectors."""

    def __init__(self, size: int):
        self.total = np.zeros(size)
        self._comp = np.zeros(size)

    def add(self, v) -> None:
        y = np.asarray(v, dtype=float) - self._comp
        t = self.total + y
        self._comp = (t - self.total) - y
        self.total = t


@dataclass
class InformativeState:
    grid: ProductGrid
    epsilon: float
    n: int = 0
    _sum: KahanSum | None = None

    def __post_init__(self):
        if self._sum is None:
            self._sum = KahanSum(self.grid.size)

    @property
    def theta_bar_weights(self) -> np.ndarray:
        if self.n == 0:
            return np.full(self.grid.size, 1.0 / self.grid.size)
        return self._sum.total / self.n

    @property
    def theta_bar(self) -> DiscreteMeasure:
        w = self.theta_bar_weights
        return self.grid.measure(w / w.sum())

    def update(self, outcome_weights) -> None:
        self._sum.add(np.asarray(outcome_weights, dtype=float).ravel())
        self.n += 1


@dataclass(frozen=True)
class TildeResponse:
    x: np.ndarray
    slack: float
    projection_cost: float
    potential: np.ndarray
    theta_under: DiscreteMeasure | None = None

    def mean_action(self, grid: ProductGrid) -> np.ndarray:
        return self.x @ grid.grid_X


def response_from_projection(grid: ProductGrid, nu: DiscreteMeasure, psi: np.ndarray, cost: float) -> TildeResponse:
    """Maximize ``min_xi int psi d(x (x) xi)`` over grid measures ``x``; slack against ``int psi d nu``."""
    Phi = psi.reshape(grid.n_x, grid.n_xi)
    if cost <= 1e-14:
        x = np.zeros(grid.n_x)
        x[0] = 1.0
        return TildeResponse(x, 0.0, cost, Phi, nu)
    value, x = maximin(Phi)
    slack = float(psi @ nu.weights - value)
    return TildeResponse(x, slack, cost, Phi, nu)


def tilde_b_response(state: InformativeState, target: MeasureTarget, smoothing_iterations: int = 30) -> TildeResponse:
    """Response at the smoothed average outcome through its projection potential."""
    smoothed = smooth(state.theta_bar, state.epsilon, iterations=smoothing_iterations)
    nu, sol = target.project(smoothed)
    return response_from_projection(target.grid, nu, sol.potential_psi, sol.squared_cost)


@dataclass(frozen=True)
class ProbeReport:
    inside: bool
    slack: float
    holds: bool


def is_tilde_b_set(target: MeasureTarget, probe_measures, tol: float = 1e-9) -> list[ProbeReport]:
    reports = []
    for theta in probe_measures:
        w = target.grid.weights_of(theta)
        if target.contains_weights(w, tol):
            reports.append(ProbeReport(True, 0.0, True))
            continue
        nu, sol = target.project(target.grid.measure(w))
        resp = response_from_projection(target.grid, nu, sol.potential_psi, sol.squared_cost)
        reports.append(ProbeReport(False, resp.slack, resp.slack <= tol))
    return reports


def min_distance_over_x(target: MeasureTarget, xi, theta0=None, lam: float = 0.0) -> tuple[float, np.ndarray]:
    """``min_x W2(lam theta0 + (1 - lam) x (x) xi, target)`` over grid measures ``x``.

    One LP over ``x``, a coupling and the projected measure.  Returns ``(distance, x)``.
    """
    grid = target.grid
    n, m = grid.size, grid.size
    xi = check_probability(xi, grid.n_xi, "xi", 1e-9)
    t0 = np.zeros(n) if theta0 is None else grid.weights_of(theta0)
    # source weight of atom (a, b): lam t0 + (1 - lam) xi_b x_a
    active = np.flatnonzero((lam * t0 > 0) | (np.tile(xi, grid.n_x) > 0))
    src = grid.support[active]
    cost = ((src[:, None, :] - grid.support[None, :, :]) ** 2).sum(-1)
    r = len(active)
    nx = grid.n_x
    n_var = nx + r * m + m
    a_idx, b_idx = active // grid.n_xi, active % grid.n_xi
    rows = sparse.kron(sparse.eye(r), np.ones((1, m)))
    mix = sparse.csr_matrix((-(1 - lam) * xi[b_idx], (np.arange(r), a_idx)), shape=(r, nx))
    eq_blocks = [sparse.hstack([mix, rows, sparse.csr_matrix((r, m))])]
    eq_rhs = [lam * t0[active]]
    cols = sparse.kron(np.ones((1, r)), sparse.eye(m))
    eq_blocks.append(sparse.hstack([sparse.csr_matrix((m, nx)), cols, -sparse.eye(m)]))
    eq_rhs.append(np.zeros(m))
    eq_blocks.append(sparse.hstack([sparse.csr_matrix(np.ones((1, nx))), sparse.csr_matrix((1, r * m + m))]))
    eq_rhs.append([1.0])
    c = target.constraints
    if len(c.A_eq):
        eq_blocks.append(sparse.hstack([sparse.csr_matrix((len(c.A_eq), nx + r * m)), c.A_eq]))
        eq_rhs.append(c.b_eq)
    A_ub = b_ub = None
    if len(c.A_ub):
        A_ub = sparse.hstack([sparse.csr_matrix((len(c.A_ub), nx + r * m)), c.A_ub]).tocsr()
        b_ub = c.b_ub
    obj = np.concatenate([np.zeros(nx), cost.ravel(), np.zeros(m)])
    res = linprog(obj, A_ub=A_ub, b_ub=b_ub, A_eq=sparse.vstack(eq_blocks).tocsr(),
                  b_eq=np.concatenate(eq_rhs), bounds=(0, None), method="highs-ds", options=_OPTIONS)
    if res.status != 0:
        raise ApproachabilityError(f"distance LP failed: {res.message}")
    x = np.clip(res.x[:nx], 0.0, None)
    return float(np.sqrt(max(res.fun, 0.0))), x / x.sum()


@dataclass
class Theorem3Verdict:
    status: str
    witness_xi: np.ndarray | None = None
    delta: float = 0.0
    responses: dict = field(default_factory=dict)

    @property
    def yes(self) -> bool:
        return self.status == "yes"


def _product_check(target: MeasureTarget):
    grid = target.grid
    c = target.constraints

    def check(xi):
        # constraint on weights w = x (x) xi is linear in x: w = K x with K[(a,b), a] = xi_b
        K = np.kron(np.eye(grid.n_x), xi.reshape(-1, 1))
        G = c.A_ub @ K if len(c.A_ub) else np.zeros((0, grid.n_x))
        G_eq = c.A_eq @ K if len(c.A_eq) else None
        if len(G) == 0 and G_eq is None:
            x = np.zeros(grid.n_x)
            x[0] = 1.0
            return -1.0, x
        return min_violation(G, c.b_ub, G_eq, c.b_eq if G_eq is not None else None)
    return check


def theorem3_check(target: MeasureTarget, mixture_density: int = 2, tol: float = 1e-9) -> Theorem3Verdict:
    """Check ``for all xi exists x: x (x) xi in target`` on grid flags and their mixtures.

    Pure grid flags are tested first, then measures over grid flags on a simplex grid
    of ``mixture_density``.  A "no" comes with the worst witness and the margin
    ``delta = min_x W2(x (x) xi, target)``.
    """
    check = _product_check(target)
    n_xi = target.grid.n_xi
    candidates = list(np.eye(n_xi))
    if mixture_density > 1 and n_xi > 1:
        candidates += [p for p in simplex_grid(n_xi, check_positive_int(mixture_density, "mixture_density"))
                       if np.count_nonzero(p) > 1]
    responses = {}
    worst = None
    for xi in candidates:
        s, x = check(xi)
        responses[tuple(np.round(xi, 12))] = x
        if s > tol and (worst is None or s > worst[0]):
            worst = (s, xi)
    if worst is None:
        return Theorem3Verdict("yes", responses=responses)
    delta, _ = min_distance_over_x(target, worst[1])
    return Theorem3Verdict("no", worst[1], delta, responses)


@dataclass(frozen=True)
class SecondaryReport:
    secondary: bool
    delta: float
    per_lambda: tuple


def secondary_point_probe(target: MeasureTarget, theta0: DiscreteMeasure, xi, lambda_grid,
                          tol: float = 1e-9) -> SecondaryReport:
    """Constant-``lam`` search for a witness that ``theta0`` is secondary.

    For each ``lam`` the least distance over grid ``x`` is computed; a constant ``lam``
    with a positive least distance already witnesses the property, so the reported
    margin is the largest of these.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0 or len(xi) != target.grid.n_xi:
        e = np.zeros(target.grid.n_xi)
        e[int(xi)] = 1.0
        xi = e
    per = []
    for lam in lambda_grid:
        lam = float(lam)
        if not 0.0 < lam <= 1.0:
            raise InvalidArgumentError(f"lambda values must lie in (0, 1], got {lam}")
        per.append((lam, min_distance_over_x(target, xi, theta0, lam)[0]))
    delta = max(d for _, d in per) if per else 0.0
    return SecondaryReport(delta > tol, delta if delta > tol else 0.0, tuple(per))


class InformativeStrategy:
    """Player 1's strategy in the lifted game: respond to the smoothed average outcome.

    Also usable as the inner strategy of the partial-monitoring block strategy, which
    consumes the mean mixed action and feeds back estimated flags.
    """

    def __init__(self, target: MeasureTarget, epsilon: float, smoothing_iterations: int = 12):
        self.target = target
        self.state = InformativeState(target.grid, epsilon)
        self.smoothing_iterations = smoothing_iterations
        self.last: TildeResponse | None = None

    def respond(self) -> TildeResponse:
        self.last = tilde_b_response(self.state, self.target, self.smoothing_iterations)
        return self.last

    def prescription(self) -> np.ndarray:
        return self.respond().mean_action(self.target.grid)

    def play(self, xi_weights) -> None:
        """Record the outcome ``x_n (x) xi`` of the last response."""
        if self.last is None:
            self.respond()
        self.state.update(np.outer(self.last.x, xi_weights))

    def observe(self, flag) -> None:
        xi = np.zeros(self.target.grid.n_xi)
        xi[self.target.grid.nearest_xi(flag)] = 1.0
        self.play(xi)
