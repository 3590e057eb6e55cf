"""Finite two-player games with vector payoffs and (possibly random) signals."""

from __future__ import annotations

import itertools
from functools import cached_property
from typing import Sequence

import numpy as np

from ._validation import as_point, check_positive_int, check_probability
from .exceptions import InfeasibleError, InfeasibleFlagError, InvalidArgumentError
from .geometry import Polytope, enumerate_vertices, hull_vertices, unique_rows


class Flag:
    """Per-action signal laws ``(s(i, y))_i``: an ``|I| x |S|`` row-stochastic array."""

    __slots__ = ("laws",)

    def __init__(self, laws):
        laws = np.atleast_2d(np.asarray(laws, dtype=float))
        for row in laws:
            check_probability(row, name="flag row")
        self.laws = np.clip(laws, 0.0, None)
        self.laws.setflags(write=False)

    @property
    def vector(self) -> np.ndarray:
        return self.laws.ravel()

    def __eq__(self, other):
        return isinstance(other, Flag) and np.array_equal(self.laws, other.laws)

    def __hash__(self):
        return hash(self.laws.tobytes())

    def __repr__(self):
        return f"Flag({self.laws.tolist()})"


def _labels(spec, name) -> tuple:
    if isinstance(spec, int):
        return tuple(str(i) for i in range(check_positive_int(spec, name)))
    labels = tuple(str(s) for s in spec)
    if not labels:
        raise InvalidArgumentError(f"{name} must be nonempty")
    return labels


class Game:
    """Two-player game: payoffs ``rho(i, j)`` in R^k and signal laws ``s(i, j)`` over labels."""

    def __init__(self, payoffs, signal_law, signal_labels: Sequence[str] | None = None,
                 actions_p1: Sequence[str] | None = None, actions_p2: Sequence[str] | None = None):
        payoffs = np.asarray(payoffs, dtype=float)
        if payoffs.ndim == 2:
            payoffs = payoffs[:, :, None]
        if payoffs.ndim != 3:
            raise InvalidArgumentError(f"payoffs must be |I| x |J| x k, got shape {payoffs.shape}")
        if not np.all(np.isfinite(payoffs)):
            raise InvalidArgumentError("payoffs contain non-finite values")
        n_i, n_j, _ = payoffs.shape
        signal_law = np.array(signal_law, dtype=float)
        if signal_law.ndim != 3 or signal_law.shape[:2] != (n_i, n_j):
            raise InvalidArgumentError(f"signal_law must be |I| x |J| x |S|, got {signal_law.shape}")
        for i, j in itertools.product(range(n_i), range(n_j)):
            signal_law[i, j] = check_probability(signal_law[i, j], name=f"signal law ({i},{j})")
        self.payoffs = payoffs.copy()
        self.signal_law = signal_law.copy()
        self.signal_labels = tuple(signal_labels) if signal_labels else tuple(str(s) for s in range(signal_law.shape[2]))
        if len(self.signal_labels) != signal_law.shape[2]:
            raise InvalidArgumentError("signal_labels length must match the signal dimension")
        self.actions_p1 = tuple(actions_p1) if actions_p1 else tuple(str(i) for i in range(n_i))
        self.actions_p2 = tuple(actions_p2) if actions_p2 else tuple(str(j) for j in range(n_j))
        self.payoffs.setflags(write=False)
        self.signal_law.setflags(write=False)
        self._preimage_cache: dict = {}

    @classmethod
    def full_monitoring(cls, payoffs, **kw) -> "Game":
        payoffs = np.asarray(payoffs, dtype=float)
        n_i, n_j = payoffs.shape[:2]
        law = np.broadcast_to(np.eye(n_j)[None], (n_i, n_j, n_j))
        return cls(payoffs, law, [f"j{j}" for j in range(n_j)], **kw)

    @classmethod
    def from_json(cls, data: dict) -> "Game":
        try:
            actions_p1 = _labels(data["I"], "I")
            actions_p2 = _labels(data["J"], "J")
            k = check_positive_int(data["k"], "k")
            payoffs = np.asarray(data["payoffs"], dtype=float)
            raw = data["signals"]
        except KeyError as exc:
            raise InvalidArgumentError(f"game description is missing key {exc}") from None
        if payoffs.ndim == 2 and k == 1:
            payoffs = payoffs[:, :, None]
        if payoffs.shape != (len(actions_p1), len(actions_p2), k):
            raise InvalidArgumentError(
                f"payoffs shape {payoffs.shape} does not match (|I|, |J|, k) = "
                f"({len(actions_p1)}, {len(actions_p2)}, {k})")
        if raw == "full":
            return cls.full_monitoring(payoffs, actions_p1=actions_p1, actions_p2=actions_p2)
        labels: list[str] = list(data.get("signal_labels", []))
        for row in raw:
            for cell in row:
                for lab in ([cell] if isinstance(cell, str) else cell.keys()):
                    if lab not in labels:
                        labels.append(lab)
        law = np.zeros((len(actions_p1), len(actions_p2), len(labels)))
        if len(raw) != len(actions_p1) or any(len(row) != len(actions_p2) for row in raw):
            raise InvalidArgumentError("signals must be an |I| x |J| array")
        for i, row in enumerate(raw):
            for j, cell in enumerate(row):
                if isinstance(cell, str):
                    law[i, j, labels.index(cell)] = 1.0
                else:
                    for lab, p in cell.items():
                        law[i, j, labels.index(lab)] = float(p)
        return cls(payoffs, law, labels, actions_p1, actions_p2)

    def to_json(self) -> dict:
        signals = []
        for i in range(self.num_actions_p1):
            row = []
            for j in range(self.num_actions_p2):
                law = self.signal_law[i, j]
                nz = np.flatnonzero(law)
                if len(nz) == 1 and law[nz[0]] == 1.0:
                    row.append(self.signal_labels[nz[0]])
                else:
                    row.append({self.signal_labels[s]: float(law[s]) for s in nz})
            signals.append(row)
        return {"I": list(self.actions_p1), "J": list(self.actions_p2), "k": self.payoff_dim,
                "payoffs": self.payoffs.tolist(), "signals": signals,
                "signal_labels": list(self.signal_labels)}

    @property
    def num_actions_p1(self) -> int:
        return self.payoffs.shape[0]

    @property
    def num_actions_p2(self) -> int:
        return self.payoffs.shape[1]

    @property
    def payoff_dim(self) -> int:
        return self.payoffs.shape[2]

    @property
    def num_signals(self) -> int:
        return self.signal_law.shape[2]

    @property
    def flag_dim(self) -> int:
        return self.num_actions_p1 * self.num_signals

    @cached_property
    def flag_matrix(self) -> np.ndarray:
        """Matrix ``M`` with ``flag_of(y).vector == M @ y``."""
        return self.signal_law.transpose(0, 2, 1).reshape(self.flag_dim, self.num_actions_p2)

    @cached_property
    def flag_set(self) -> Polytope:
        """The range of ``flag_of`` over mixed actions, as a polytope of flag vectors."""
        return Polytope(self.flag_matrix.T)

    @cached_property
    def flag_vertices(self) -> np.ndarray:
        """Extreme flags, listed in the order of the first pure action producing them."""
        return hull_vertices(self.flag_matrix.T)

    @cached_property
    def payoff_diameter(self) -> float:
        P = self.payoffs.reshape(-1, self.payoff_dim)
        return float(np.sqrt(((P[:, None] - P[None]) ** 2).sum(-1).max()))

    def is_full_monitoring(self) -> bool:
        """True when every flag pins down the opponent's mixed action."""
        A = np.vstack([np.ones((1, self.num_actions_p2)), self.flag_matrix])
        return int(np.linalg.matrix_rank(A)) == self.num_actions_p2

    def __repr__(self):
        return f"Game(|I|={self.num_actions_p1}, |J|={self.num_actions_p2}, k={self.payoff_dim}, |S|={self.num_signals})"


def mixed_payoff(game: Game, x, y) -> np.ndarray:
    x = check_probability(x, game.num_actions_p1, "x")
    y = check_probability(y, game.num_actions_p2, "y")
    return np.einsum("i,j,ijk->k", x, y, game.payoffs)


def flag_of(game: Game, y) -> Flag:
    y = check_probability(y, game.num_actions_p2, "y")
    return Flag(np.einsum("j,ijs->is", y, game.signal_law))


def _flag_vector(game: Game, flag) -> np.ndarray:
    if isinstance(flag, Flag):
        vec = flag.vector
    else:
        vec = np.asarray(flag, dtype=float).ravel()
    return as_point(vec, dim=game.flag_dim, name="flag")


def project_to_flag_set(game: Game, flag) -> Flag:
    """Nearest flag in the range of ``flag_of`` (Euclidean in flag coordinates)."""
    p = game.flag_set.project(_flag_vector(game, flag))
    laws = np.clip(p.reshape(game.num_actions_p1, game.num_signals), 0.0, None)
    return Flag(laws / laws.sum(axis=1, keepdims=True))


def flag_preimage_vertices(game: Game, flag, tol: float = 1e-9) -> np.ndarray:
    """Vertices of ``{y in simplex: flag_of(y) = flag}`` as rows of an array."""
    vec = _flag_vector(game, flag)
    key = tuple(np.round(vec, 12))
    cached = game._preimage_cache.get(key)
    if cached is not None:
        return cached
    proj = game.flag_set.project(vec)
    if np.linalg.norm(proj - vec) > tol:
        raise InfeasibleFlagError(f"flag lies at distance {np.linalg.norm(proj - vec):.3g} from the flag set")
    n_j = game.num_actions_p2
    M = game.flag_matrix
    A_eq = np.vstack([np.ones((1, n_j)), M])
    b_eq = np.concatenate([[1.0], proj])
    try:
        verts = enumerate_vertices(-np.eye(n_j), np.zeros(n_j), A_eq, b_eq, tol=max(tol, 1e-9))
    except InfeasibleError as exc:
        raise InfeasibleFlagError(str(exc)) from None
    verts = np.where(verts < 1e-12, 0.0, verts)
    verts /= verts.sum(axis=1, keepdims=True)
    verts = unique_rows(verts, 1e-9)
    verts.setflags(write=False)
    if len(game._preimage_cache) < 100_000:
        game._preimage_cache[key] = verts
    return verts


def preimage_of_flag_cell(game: Game, flags: np.ndarray) -> np.ndarray:
    """Vertices of ``{y in simplex: flag_of(y) in conv(flags)}``."""
    flags = np.atleast_2d(np.asarray(flags, dtype=float))
    if len(flags) == 1:
        return flag_preimage_vertices(game, flags[0])
    n_j, m = game.num_actions_p2, len(flags)
    M = game.flag_matrix
    # lifted polytope in (y, lam): y, lam >= 0, sum y = 1, sum lam = 1, M y = flags^T lam
    A_eq = np.zeros((2 + M.shape[0], n_j + m))
    A_eq[0, :n_j] = 1.0
    A_eq[1, n_j:] = 1.0
    A_eq[2:, :n_j] = M
    A_eq[2:, n_j:] = -flags.T
    b_eq = np.zeros(A_eq.shape[0])
    b_eq[:2] = 1.0
    lifted = enumerate_vertices(-np.eye(n_j + m), np.zeros(n_j + m), A_eq, b_eq)
    ys = np.clip(lifted[:, :n_j], 0.0, None)
    return hull_vertices(ys / ys.sum(axis=1, keepdims=True))


def payoff_vertices(game: Game, x, flag) -> np.ndarray:
    """Points ``rho(x, y)`` over the preimage vertices of ``flag`` (deduplicated)."""
    x = check_probability(x, game.num_actions_p1, "x")
    ys = flag_preimage_vertices(game, flag)
    pts = np.einsum("i,vj,ijk->vk", x, ys, game.payoffs)
    return unique_rows(pts, 1e-12)


def _row_basis(A: np.ndarray, tol: float = 1e-10) -> list[int]:
    rows: list[int] = []
    for r in range(len(A)):
        if np.linalg.matrix_rank(A[rows + [r]], tol=tol) == len(rows) + 1:
            rows.append(r)
    return rows


def lipschitz_constant(game: Game) -> float:
    """Certified Hausdorff-Lipschitz constant of ``(x, flag) -> P(x, flag)``.

    ``P`` moves by at most ``Lx |dx|`` in the mixed action, with ``Lx`` the largest
    spectral norm of a payoff slice restricted to zero-sum directions, and by at most
    ``Lxi |dflag|`` in the flag, where ``Lxi`` combines the payoff spread along the
    opponent's actions with a basis-enumeration bound on how far preimage polytopes
    move.  The combined constant is ``sqrt(Lx^2 + Lxi^2)``.
    """
    n_i, n_j, _ = game.payoffs.shape
    center = np.eye(n_i) - np.ones((n_i, n_i)) / n_i
    lx = max(np.linalg.norm(game.payoffs[:, j, :].T @ center, 2) for j in range(n_j))

    spread = 0.0
    for i in range(n_i):
        P = game.payoffs[i]
        spread = max(spread, float(np.sqrt(((P[:, None] - P[None]) ** 2).sum(-1).max())))

    A = np.vstack([np.ones((1, n_j)), game.flag_matrix])
    rows = _row_basis(A)
    flag_rows = [r for r in rows if r != 0]
    hoffman = 0.0
    if flag_rows:
        A_r = A[rows]
        cols = [rows.index(r) for r in flag_rows]
        for basis in itertools.combinations(range(n_j), len(rows)):
            E = A_r[:, basis]
            if abs(np.linalg.det(E)) < 1e-12:
                continue
            block = np.linalg.inv(E)[:, cols]
            bound = min(np.linalg.norm(block, axis=1).sum(),
                        np.sqrt(block.shape[0]) * np.linalg.norm(block, 2))
            hoffman = max(hoffman, float(bound))
    lxi = 0.5 * spread * hoffman
    return float(np.hypot(lx, lxi))


def _hausdorff(P: np.ndarray, Q: np.ndarray) -> float:
    PP, QQ = Polytope(P), Polytope(Q)
    return max(max(QQ.distance(p) for p in P), max(PP.distance(q) for q in Q))


def estimate_lipschitz(game: Game, samples: int = 200, seed: int = 0) -> float:
    """Sampled lower estimate of the constant bounded by :func:`lipschitz_constant`."""
    rng = np.random.default_rng(seed)
    n_i, n_j = game.num_actions_p1, game.num_actions_p2
    best = 0.0
    for _ in range(samples):
        x1, x2 = rng.dirichlet(np.ones(n_i), 2)
        y1, y2 = rng.dirichlet(np.ones(n_j), 2)
        f1, f2 = game.flag_matrix @ y1, game.flag_matrix @ y2
        gap = np.sqrt(np.sum((x1 - x2) ** 2) + np.sum((f1 - f2) ** 2))
        if gap < 1e-9:
            continue
        d = _hausdorff(payoff_vertices(game, x1, f1), payoff_vertices(game, x2, f2))
        best = max(best, d / gap)
    return best
