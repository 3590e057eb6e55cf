"""Euclidean convex-set geometry: polytopes, unions of polytopes, projections and normals.

Polytopes carry both a vertex list and a halfspace description.  Projections are
computed exactly by enumerating the faces of the H-description: the nearest point
of a polytope is the orthogonal projection onto the affine hull of the face whose
relative interior contains it, so the feasible face candidate of least distance is
the projection.  This is exponential in the dimension and only meant for the small
dimensions used by repeated-game experiments.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ._validation import as_point, as_points
from .exceptions import InfeasibleError, InvalidArgumentError, NoNormalError

TOL = 1e-9


def unique_rows(points: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Drop rows within ``tol`` (max-norm) of an earlier row, keeping first occurrences."""
    points = np.asarray(points, dtype=float)
    if len(points) <= 1:
        return points.copy()
    keep: list[int] = []
    for i, p in enumerate(points):
        if not keep or np.min(np.max(np.abs(points[keep] - p), axis=1)) > tol:
            keep.append(i)
    return points[keep]


def affine_hull(points: np.ndarray, tol: float = TOL):
    """Return ``(origin, basis, complement)`` of the affine hull of ``points``.

    ``basis`` has orthonormal rows spanning the hull directions and ``complement``
    has orthonormal rows spanning its orthogonal complement.
    """
    points = np.asarray(points, dtype=float)
    origin = points.mean(axis=0)
    centered = points - origin
    dim = points.shape[1]
    if len(points) == 1 or not np.any(centered):
        return origin, np.zeros((0, dim)), np.eye(dim)
    _, sing, vt = np.linalg.svd(centered, full_matrices=True)
    scale = max(1.0, float(np.abs(points).max()))
    rank = int(np.sum(sing > tol * scale))
    return origin, vt[:rank], vt[rank:]


def hull_vertices(points, tol: float = TOL) -> np.ndarray:
    """Extreme points of the convex hull of ``points`` (works for degenerate hulls)."""
    points = unique_rows(as_points(points), tol)
    if len(points) <= 1:
        return points
    origin, basis, _ = affine_hull(points, tol)
    rank = basis.shape[0]
    if rank == 0:
        return points[:1]
    coords = (points - origin) @ basis.T
    if rank == 1:
        t = coords[:, 0]
        idx = sorted({int(np.argmin(t)), int(np.argmax(t))})
        return points[idx]
    if len(points) <= rank:
        return points
    try:
        hull = ConvexHull(coords)
    except QhullError:
        hull = ConvexHull(coords, qhull_options="QJ")
    return points[np.sort(hull.vertices)]


def _canonical_halfspaces(vertices: np.ndarray, tol: float = TOL):
    """Facet inequalities ``A z <= b`` and equalities ``A_eq z = b_eq`` for conv(vertices)."""
    dim = vertices.shape[1]
    origin, basis, complement = affine_hull(vertices, tol)
    A_eq = complement.copy()
    b_eq = A_eq @ origin
    rank = basis.shape[0]
    if rank == 0:
        return np.zeros((0, dim)), np.zeros(0), A_eq, b_eq
    coords = (vertices - origin) @ basis.T
    if rank == 1:
        u = basis[0]
        t = coords[:, 0]
        A = np.vstack([u, -u])
        b = np.array([t.max() + u @ origin, -t.min() - u @ origin])
        return A, b, A_eq, b_eq
    try:
        hull = ConvexHull(coords)
    except QhullError:
        hull = ConvexHull(coords, qhull_options="QJ")
    normals = hull.equations[:, :-1]
    offsets = -hull.equations[:, -1]
    A = normals @ basis
    b = offsets + A @ origin
    norms = np.linalg.norm(A, axis=1)
    A = A / norms[:, None]
    b = b / norms
    # qhull triangulates coplanar facets; merge duplicated inequalities
    rows = unique_rows(np.column_stack([A, b]), 1e-10)
    return rows[:, :-1], rows[:, -1], A_eq, b_eq


def enumerate_vertices(A, b, A_eq=None, b_eq=None, tol: float = TOL) -> np.ndarray:
    """Vertices of ``{z : A z <= b, A_eq z = b_eq}`` by active-set enumeration.

    Raises :class:`InfeasibleError` when the set is empty.  The set must be bounded
    for the result to describe it.
    """
    A = as_points(A, name="A")
    dim = A.shape[1]
    b = np.asarray(b, dtype=float).ravel()
    if A_eq is None or len(A_eq) == 0:
        A_eq = np.zeros((0, dim))
        b_eq = np.zeros(0)
    A_eq = np.asarray(A_eq, dtype=float).reshape(-1, dim)
    b_eq = np.asarray(b_eq, dtype=float).ravel()
    scale = max(1.0, float(np.abs(b).max(initial=0.0)), float(np.abs(b_eq).max(initial=0.0)))
    found = []
    eq_rank = np.linalg.matrix_rank(A_eq) if len(A_eq) else 0
    need = dim - eq_rank
    for active in itertools.combinations(range(len(A)), need):
        M = np.vstack([A_eq, A[list(active)]])
        rhs = np.concatenate([b_eq, b[list(active)]])
        if np.linalg.matrix_rank(M) < dim:
            continue
        z, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        if np.max(np.abs(M @ z - rhs), initial=0.0) > tol * scale:
            continue
        if np.all(A @ z <= b + tol * scale):
            found.append(z)
    if not found:
        raise InfeasibleError("polytope described by the halfspaces is empty or unbounded")
    return unique_rows(np.array(found), tol)


class Polytope:
    """Bounded convex polytope with synchronized V- and H-descriptions.

    Build with :meth:`from_vertices` or :meth:`from_halfspaces`.  The stored
    H-description is the canonical one (unit-norm facet inequalities plus
    equalities for the orthogonal complement of the affine hull).
    """

    def __init__(self, vertices):
        verts = hull_vertices(as_points(vertices, name="vertices"))
        if len(verts) == 0:
            raise InvalidArgumentError("a polytope needs at least one vertex")
        self.vertices = verts
        self.A, self.b, self.A_eq, self.b_eq = _canonical_halfspaces(verts)
        for arr in (self.vertices, self.A, self.b, self.A_eq, self.b_eq):
            arr.setflags(write=False)

    @classmethod
    def from_vertices(cls, vertices) -> "Polytope":
        return cls(vertices)

    @classmethod
    def from_halfspaces(cls, A, b, A_eq=None, b_eq=None) -> "Polytope":
        return cls(enumerate_vertices(A, b, A_eq, b_eq))

    @classmethod
    def box(cls, lower, upper) -> "Polytope":
        lower = as_point(lower, name="lower")
        upper = as_point(upper, dim=len(lower), name="upper")
        corners = [np.where(bits, upper, lower) for bits in itertools.product([0, 1], repeat=len(lower))]
        return cls(np.array(corners, dtype=float))

    @classmethod
    def simplex(cls, n: int) -> "Polytope":
        """The probability simplex embedded in R^n."""
        return cls(np.eye(n))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def halfspaces(self) -> list[tuple[np.ndarray, float]]:
        """All constraints as ``(a, b)`` pairs meaning ``<a, z> <= b`` (equalities appear twice)."""
        out = [(a.copy(), float(bb)) for a, bb in zip(self.A, self.b)]
        for a, bb in zip(self.A_eq, self.b_eq):
            out.append((a.copy(), float(bb)))
            out.append((-a, -float(bb)))
        return out

    @property
    def diameter(self) -> float:
        V = self.vertices
        if len(V) == 1:
            return 0.0
        diff = V[:, None, :] - V[None, :, :]
        return float(np.sqrt((diff ** 2).sum(-1).max()))

    def support(self, direction) -> float:
        return float(np.max(self.vertices @ np.asarray(direction, dtype=float)))

    @cached_property
    def _face_projectors(self):
        dim = self.dim
        eq_rank = self.A_eq.shape[0]
        free = dim - eq_rank
        mats, offs = [], []
        for size in range(free + 1):
            for active in itertools.combinations(range(len(self.A)), size):
                M = np.vstack([self.A_eq, self.A[list(active)]])
                rhs = np.concatenate([self.b_eq, self.b[list(active)]])
                if len(M) == 0:
                    mats.append(np.eye(dim))
                    offs.append(np.zeros(dim))
                    continue
                gram = M @ M.T
                if np.linalg.matrix_rank(gram) < len(M):
                    continue
                inv = np.linalg.solve(gram, np.eye(len(M)))
                mats.append(np.eye(dim) - M.T @ inv @ M)
                offs.append(M.T @ inv @ rhs)
        return np.array(mats), np.array(offs)

    def project_many(self, Z) -> np.ndarray:
        """Euclidean projections of each row of ``Z``."""
        Z = as_points(Z, dim=self.dim, name="Z")
        if len(self.vertices) == 1:
            return np.repeat(self.vertices, len(Z), axis=0)
        mats, offs = self._face_projectors
        cands = np.einsum("fij,nj->nfi", mats, Z) + offs[None]
        scale = max(1.0, float(np.abs(self.b).max(initial=0.0)))
        viol = np.einsum("mi,nfi->nfm", self.A, cands) - self.b
        ok = np.all(viol <= 1e-10 * scale, axis=2)
        if self.A_eq.shape[0]:
            eq = np.abs(np.einsum("mi,nfi->nfm", self.A_eq, cands) - self.b_eq)
            ok &= np.all(eq <= 1e-10 * scale, axis=2)
        dist = np.where(ok, ((cands - Z[:, None, :]) ** 2).sum(-1), np.inf)
        best = np.argmin(dist, axis=1)
        if np.any(~np.isfinite(dist[np.arange(len(Z)), best])):
            raise InfeasibleError("no feasible face candidate; polytope description is inconsistent")
        return cands[np.arange(len(Z)), best]

    def project(self, z) -> np.ndarray:
        return self.project_many(as_point(z, dim=self.dim)[None, :])[0]

    def distance(self, z) -> float:
        z = as_point(z, dim=self.dim)
        return float(np.linalg.norm(z - self.project(z)))

    def contains(self, z, tol: float = TOL) -> bool:
        return self.distance(z) <= tol

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    def __repr__(self) -> str:
        return f"Polytope(dim={self.dim}, n_vertices={len(self.vertices)}, n_facets={len(self.A)})"


def polytope_distance(P: Polytope, Q: Polytope) -> float:
    """Euclidean distance between two polytopes (0 when they intersect)."""
    diffs = (P.vertices[:, None, :] - Q.vertices[None, :, :]).reshape(-1, P.dim)
    return Polytope(diffs).distance(np.zeros(P.dim))


def minkowski_sum(vertex_sets: Sequence[np.ndarray], weights: Sequence[float] | None = None) -> np.ndarray:
    """Vertices of ``sum_a w_a conv(vertex_sets[a])``, reducing to hull vertices after each step."""
    if weights is None:
        weights = np.ones(len(vertex_sets))
    acc = None
    for V, w in zip(vertex_sets, weights):
        V = np.asarray(V, dtype=float) * w
        if acc is None:
            acc = hull_vertices(V)
        else:
            acc = hull_vertices((acc[:, None, :] + V[None, :, :]).reshape(-1, V.shape[1]))
    if acc is None:
        raise InvalidArgumentError("empty Minkowski sum")
    return acc


@dataclass(frozen=True)
class TargetSet:
    """Closed target set represented as a finite union of polytopes."""

    pieces: tuple[Polytope, ...]
    convex_flag: bool = True

    def __post_init__(self):
        if len(self.pieces) == 0:
            raise InvalidArgumentError("target set must have at least one piece")
        if self.convex_flag and len(self.pieces) != 1:
            raise InvalidArgumentError("a convex target set must have exactly one piece")
        dims = {p.dim for p in self.pieces}
        if len(dims) != 1:
            raise InvalidArgumentError(f"pieces have mixed dimensions {dims}")
        object.__setattr__(self, "pieces", tuple(self.pieces))

    @classmethod
    def convex(cls, polytope: Polytope) -> "TargetSet":
        return cls((polytope,), True)

    @classmethod
    def union(cls, polytopes: Sequence[Polytope]) -> "TargetSet":
        return cls(tuple(polytopes), len(polytopes) == 1)

    @property
    def dim(self) -> int:
        return self.pieces[0].dim

    @property
    def polytope(self) -> Polytope:
        if not self.convex_flag:
            raise InvalidArgumentError("target set is not convex")
        return self.pieces[0]

    @classmethod
    def from_json(cls, data: dict) -> "TargetSet":
        pieces = []
        for piece in data["pieces"]:
            if "vertices" in piece:
                pieces.append(Polytope.from_vertices(piece["vertices"]))
            elif "halfspaces" in piece:
                hs = piece["halfspaces"]
                A = np.array([h["a"] for h in hs], dtype=float)
                b = np.array([h["b"] for h in hs], dtype=float)
                pieces.append(Polytope.from_halfspaces(A, b))
            else:
                raise InvalidArgumentError("each piece needs 'vertices' or 'halfspaces'")
        return cls(tuple(pieces), bool(data.get("convex", len(pieces) == 1)))

    def to_json(self) -> dict:
        return {"convex": self.convex_flag, "pieces": [p.to_json() for p in self.pieces]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def distance_and_projection(target: TargetSet, z) -> tuple[float, list[np.ndarray]]:
    """Distance from ``z`` to ``target`` and one projection per closest piece.

    Projections come in piece order; ties within 1e-9 of the optimum are all kept.
    """
    if not isinstance(target, TargetSet) or not target.pieces:
        raise InvalidArgumentError("target must be a nonempty TargetSet")
    z = as_point(z, dim=target.dim)
    projs = [piece.project(z) for piece in target.pieces]
    dists = np.array([np.linalg.norm(z - p) for p in projs])
    best = float(dists.min())
    chosen = [p for p, d in zip(projs, dists) if d <= best + TOL]
    return best, list(unique_rows(np.array(chosen), TOL))


def contains(target: TargetSet, z, tol: float = TOL) -> bool:
    return distance_and_projection(target, z)[0] <= tol


def proximal_normal(target: TargetSet, z) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(p, q)`` with ``p`` the first projection of ``z`` and ``q = z - p``."""
    dist, projs = distance_and_projection(target, z)
    if dist <= TOL:
        raise NoNormalError("point lies in the target set; no nonzero proximal normal")
    p = projs[0]
    return p, as_point(z) - p
