"""Exact discrete optimal transport by linear programming.

Plans come from the primal solution and Kantorovich potentials from the equality
duals.  Solver duals are feasible only up to the solver tolerance, so they are
repaired by one round of c-transforms, which makes them exactly feasible without
lowering the dual objective.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ._validation import as_points, check_probability
from .exceptions import ApproachabilityError, InfeasibleError, InvalidArgumentError

_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
DUALITY_TOL = 1e-8


class DiscreteMeasure:
    """Finitely supported probability measure; duplicate atoms are merged on construction.

    Zero-weight atoms are kept so that measures on a fixed grid keep their support.
    """

    __slots__ = ("atoms", "weights")

    def __init__(self, atoms, weights=None, merge: bool = True):
        atoms = as_points(atoms, name="atoms")
        if weights is None:
            weights = np.full(len(atoms), 1.0 / len(atoms))
        weights = check_probability(weights, len(atoms), "weights", tol=1e-10)
        if merge and len(atoms) > 1:
            keys = np.round(atoms, 12) + 0.0
            _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
            if len(first) < len(atoms):
                inverse = inverse.ravel()
                order = np.argsort(first)
                rank = np.empty_like(order)
                rank[order] = np.arange(len(order))
                merged = np.zeros(len(first))
                np.add.at(merged, rank[inverse], weights)
                atoms, weights = atoms[first[order]], merged
        self.atoms = atoms
        self.weights = weights / weights.sum()
        self.atoms.setflags(write=False)
        self.weights.setflags(write=False)

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), [1.0])

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return len(self.atoms)

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def pruned(self, tol: float = 0.0) -> "DiscreteMeasure":
        keep = self.weights > tol
        return DiscreteMeasure(self.atoms[keep], self.weights[keep], merge=False)

    def mix(self, other: "DiscreteMeasure", lam: float) -> "DiscreteMeasure":
        """``(1 - lam) * self + lam * other``."""
        return DiscreteMeasure(np.vstack([self.atoms, other.atoms]),
                               np.concatenate([(1 - lam) * self.weights, lam * other.weights]))

    def to_json(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data: dict) -> "DiscreteMeasure":
        return cls(data["atoms"], data["weights"])

    def __repr__(self):
        return f"DiscreteMeasure(n_atoms={len(self)}, dim={self.dim})"


@dataclass(frozen=True)
class TransportPlan:
    coupling: np.ndarray
    source: DiscreteMeasure
    target: DiscreteMeasure

    def __post_init__(self):
        if np.any(self.coupling < -1e-12):
            raise InvalidArgumentError("coupling has negative mass")
        if np.max(np.abs(self.coupling.sum(1) - self.source.weights)) > 1e-10 or \
                np.max(np.abs(self.coupling.sum(0) - self.target.weights)) > 1e-10:
            raise InvalidArgumentError("coupling marginals do not match the measures")


@dataclass(frozen=True)
class TransportSolution:
    squared_cost: float
    plan: TransportPlan
    potential_phi: np.ndarray
    potential_psi: np.ndarray

    def __post_init__(self):
        mu, nu = self.plan.source, self.plan.target
        cost = _sq_cost(mu.atoms, nu.atoms)
        primal = float(np.sum(self.plan.coupling * cost))
        dual = float(self.potential_phi @ mu.weights + self.potential_psi @ nu.weights)
        scale = max(1.0, abs(self.squared_cost))
        if abs(primal - self.squared_cost) > 1e-10 * scale:
            raise ApproachabilityError(f"primal cost {primal} differs from reported {self.squared_cost}")
        if abs(dual - self.squared_cost) > DUALITY_TOL * scale:
            raise ApproachabilityError(f"duality gap {abs(dual - self.squared_cost):.3g} exceeds tolerance")
        slack = self.potential_phi[:, None] + self.potential_psi[None, :] - cost
        if slack.max() > DUALITY_TOL * scale:
            raise ApproachabilityError(f"potentials violate dual feasibility by {slack.max():.3g}")

    @property
    def distance(self) -> float:
        return float(np.sqrt(max(self.squared_cost, 0.0)))

    @property
    def coupling(self) -> np.ndarray:
        return self.plan.coupling


def _sq_cost(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1)


def _check_dims(mu: DiscreteMeasure, nu: DiscreteMeasure):
    if not isinstance(mu, DiscreteMeasure) or not isinstance(nu, DiscreteMeasure):
        raise InvalidArgumentError("arguments must be DiscreteMeasure instances")
    if mu.dim != nu.dim:
        raise InvalidArgumentError(f"dimension mismatch: {mu.dim} vs {nu.dim}")


def _marginal_matrix(n: int, m: int) -> sparse.csr_matrix:
    rows = sparse.kron(sparse.eye(n), np.ones((1, m)))
    cols = sparse.kron(np.ones((1, n)), sparse.eye(m))
    return sparse.vstack([rows, cols]).tocsr()


def _transport_lp(cost: np.ndarray, a: np.ndarray, b: np.ndarray):
    n, m = cost.shape
    res = linprog(cost.ravel(), A_eq=_marginal_matrix(n, m), b_eq=np.concatenate([a, b]),
                  bounds=(0, None), method="highs-ds", options=_OPTIONS)
    if res.status != 0:
        raise ApproachabilityError(f"transport LP failed: {res.message}")
    return res


def _repair(cost: np.ndarray, phi: np.ndarray, psi: np.ndarray):
    phi = np.min(cost - psi[None, :], axis=1)
    psi = np.min(cost - phi[:, None], axis=0)
    return phi, psi


def _lex_first(atoms: np.ndarray) -> int:
    return int(np.lexsort(atoms.T[::-1])[0])


def _solution(mu, nu, cost, gamma, phi, psi) -> TransportSolution:
    gamma = np.clip(gamma, 0.0, None)
    # clean solver roundoff so marginals match to machine precision
    gamma *= np.where(gamma.sum(1) > 0, mu.weights / np.maximum(gamma.sum(1), 1e-300), 0.0)[:, None]
    phi, psi = _repair(cost, phi, psi)
    shift = phi[_lex_first(mu.atoms)]
    phi, psi = phi - shift, psi + shift
    return TransportSolution(float(np.sum(gamma * cost)), TransportPlan(gamma, mu, nu), phi, psi)


def w2(mu: DiscreteMeasure, nu: DiscreteMeasure) -> TransportSolution:
    """Squared-distance optimal transport between two discrete measures."""
    _check_dims(mu, nu)
    cost = _sq_cost(mu.atoms, nu.atoms)
    n, m = cost.shape
    if n == 1 or m == 1:
        gamma = np.outer(mu.weights, nu.weights)
        if n == 1:
            psi = cost[0].copy()
            phi = np.zeros(1)
        else:
            phi = cost[:, 0].copy()
            psi = np.zeros(1)
        return _solution(mu, nu, cost, gamma, phi, psi)
    res = _transport_lp(cost, mu.weights, nu.weights)
    gamma = res.x.reshape(n, m)
    duals = res.eqlin.marginals
    return _solution(mu, nu, cost, gamma, duals[:n].copy(), duals[n:].copy())


def w2_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return w2(mu, nu).distance


def w1(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Optimal transport value with Euclidean (unsquared) cost."""
    _check_dims(mu, nu)
    cost = np.sqrt(_sq_cost(mu.atoms, nu.atoms))
    if len(mu) == 1 or len(nu) == 1:
        return float(np.sum(np.outer(mu.weights, nu.weights) * cost))
    return float(_transport_lp(cost, mu.weights, nu.weights).fun)


def pushforward(mapping: Callable | np.ndarray, mu: DiscreteMeasure) -> DiscreteMeasure:
    """Image measure of ``mu`` under ``mapping``, given as a callable or a table of mapped atoms."""
    if callable(mapping):
        images = np.array([np.atleast_1d(np.asarray(mapping(a), dtype=float)) for a in mu.atoms])
    else:
        images = as_points(mapping, name="mapping")
        if len(images) != len(mu):
            raise InvalidArgumentError("mapping table must have one row per atom")
    return DiscreteMeasure(images, mu.weights)


def displacement_interpolate(mu: DiscreteMeasure, nu: DiscreteMeasure, t: float) -> DiscreteMeasure:
    """``sigma_t # gamma`` for an optimal plan ``gamma`` between ``mu`` and ``nu``."""
    _check_dims(mu, nu)
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return mu
    if t == 1.0:
        return nu
    gamma = w2(mu, nu).coupling
    ii, jj = np.nonzero(gamma > 1e-15)
    atoms = (1 - t) * mu.atoms[ii] + t * nu.atoms[jj]
    w = gamma[ii, jj]
    return DiscreteMeasure(atoms, w / w.sum())


def product_measure(x: DiscreteMeasure, xi: DiscreteMeasure) -> DiscreteMeasure:
    """Product measure on concatenated coordinates; atom ``(a, b)`` is at index ``a * len(xi) + b``."""
    n, m = len(x), len(xi)
    atoms = np.hstack([np.repeat(x.atoms, m, axis=0), np.tile(xi.atoms, (n, 1))])
    return DiscreteMeasure(atoms, np.outer(x.weights, xi.weights).ravel(), merge=False)


@dataclass(frozen=True)
class LinearConstraints:
    """Constraints ``A_ub w <= b_ub`` and ``A_eq w = b_eq`` on a weight vector."""

    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray

    @classmethod
    def build(cls, size: int, A_ub=None, b_ub=None, A_eq=None, b_eq=None) -> "LinearConstraints":
        def block(A, b):
            if A is None or len(A) == 0:
                return np.zeros((0, size)), np.zeros(0)
            A = np.atleast_2d(np.asarray(A, dtype=float))
            b = np.asarray(b, dtype=float).ravel()
            if A.shape[1] != size or len(b) != len(A):
                raise InvalidArgumentError(f"constraint block has shape {A.shape} for {size} weights")
            return A, b
        return cls(*block(A_ub, b_ub), *block(A_eq, b_eq))

    @property
    def size(self) -> int:
        return self.A_ub.shape[1]

    def violation(self, w) -> float:
        w = np.asarray(w, dtype=float)
        v = [0.0]
        if len(self.A_ub):
            v.append(float(np.max(self.A_ub @ w - self.b_ub)))
        if len(self.A_eq):
            v.append(float(np.max(np.abs(self.A_eq @ w - self.b_eq))))
        return max(v)

    def satisfied(self, w, tol: float = 1e-9) -> bool:
        return self.violation(w) <= tol

    def to_json(self) -> dict:
        return {"A_ub": self.A_ub.tolist(), "b_ub": self.b_ub.tolist(),
                "A_eq": self.A_eq.tolist(), "b_eq": self.b_eq.tolist()}


def project_measure(mu: DiscreteMeasure, support, constraints: LinearConstraints):
    """W2-projection of ``mu`` onto measures on ``support`` whose weights satisfy ``constraints``.

    Solves one LP over couplings with free second marginal.  Returns ``(nu_star, solution)``
    where ``solution`` transports ``mu`` to ``nu_star`` (all support atoms kept, possibly
    with zero weight) and ``solution.potential_psi`` lives on the support.
    """
    support = as_points(support, dim=mu.dim, name="support")
    n, m = len(mu), len(support)
    if constraints.size != m:
        raise InvalidArgumentError(f"constraints act on {constraints.size} weights, support has {m}")
    cost = _sq_cost(mu.atoms, support)
    # variables [gamma (n*m), nu (m)]
    rows = sparse.kron(sparse.eye(n), np.ones((1, m)))
    cols = sparse.kron(np.ones((1, n)), sparse.eye(m))
    A_eq = [sparse.hstack([rows, sparse.csr_matrix((n, m))]), sparse.hstack([cols, -sparse.eye(m)])]
    b_eq = [mu.weights, np.zeros(m)]
    if len(constraints.A_eq):
        A_eq.append(sparse.hstack([sparse.csr_matrix((len(constraints.A_eq), n * m)), constraints.A_eq]))
        b_eq.append(constraints.b_eq)
    A_ub = b_ub = None
    if len(constraints.A_ub):
        A_ub = sparse.hstack([sparse.csr_matrix((len(constraints.A_ub), n * m)), constraints.A_ub]).tocsr()
        b_ub = constraints.b_ub
    c = np.concatenate([cost.ravel(), np.zeros(m)])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=sparse.vstack(A_eq).tocsr(), b_eq=np.concatenate(b_eq),
                  bounds=(0, None), method="highs-ds", options=_OPTIONS)
    if res.status == 2:
        raise InfeasibleError("measure constraints are infeasible on the given support")
    if res.status != 0:
        raise ApproachabilityError(f"projection LP failed: {res.message}")
    gamma = np.clip(res.x[: n * m].reshape(n, m), 0.0, None)
    gamma *= (mu.weights / np.maximum(gamma.sum(1), 1e-300))[:, None]
    nu_w = gamma.sum(0)
    nu = DiscreteMeasure(support, nu_w / nu_w.sum(), merge=False)
    duals = res.eqlin.marginals
    sol = _solution(mu, nu, cost, gamma, duals[:n].copy(), duals[n:n + m].copy())
    return nu, sol
