"""Opponents for simulations.

Every opponent answers with barycentric weights over a list of ``n`` vertices of its
action set (pure actions, grid flags, or the vertices of a polytope).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .exceptions import ConfigError
from .grids import simplex_grid
from .io import read_replay

Score = Callable[[np.ndarray], np.ndarray]


class Uniform:
    """Fresh Dirichlet(1) weights every stage, i.e. a uniform point of the action set."""

    name = "uniform"

    def __init__(self, n: int):
        self.n = n

    def act(self, rng: np.random.Generator, stage: int, score: Score | None = None) -> np.ndarray:
        return rng.dirichlet(np.ones(self.n))


class Stationary:
    name = "stationary"

    def __init__(self, n: int, weights):
        self.n = n
        self.weights = np.asarray(weights, dtype=float)

    def act(self, rng, stage, score=None) -> np.ndarray:
        return self.weights


class BestResponse:
    """Greedy: the grid action maximizing the caller's score (next-stage distance)."""

    name = "best_response"

    def __init__(self, n: int, density: int = 10):
        self.n = n
        self.candidates = simplex_grid(n, density)

    def act(self, rng, stage, score: Score | None = None) -> np.ndarray:
        if score is None:
            raise ConfigError("best_response needs a scoring function")
        values = score(self.candidates)
        return self.candidates[int(np.argmax(values))]


class Replay:
    name = "replay"

    def __init__(self, n: int, actions):
        self.n = n
        self.actions = [_weights(n, a) for a in actions]

    def act(self, rng, stage, score=None) -> np.ndarray:
        return self.actions[(stage - 1) % len(self.actions)]


def _weights(n: int, action) -> np.ndarray:
    if isinstance(action, (int, np.integer)):
        if not 0 <= action < n:
            raise ConfigError(f"vertex index {action} out of range for {n} vertices")
        w = np.zeros(n)
        w[action] = 1.0
        return w
    w = np.asarray(action, dtype=float)
    if w.shape != (n,) or np.any(w < -1e-12) or abs(w.sum() - 1) > 1e-9:
        raise ConfigError(f"action weights {w.tolist()} are not a probability vector of length {n}")
    return np.clip(w, 0.0, None) / w.sum()


def make_adversary(spec: str, n: int, density: int = 10):
    """Build from ``uniform``, ``best_response``, ``stationary:<index|extreme|w1,w2,...>`` or ``replay:<file>``."""
    kind, _, arg = spec.partition(":")
    if kind == "uniform":
        return Uniform(n)
    if kind == "best_response":
        return BestResponse(n, density)
    if kind == "stationary":
        if arg in ("", "extreme"):
            return Stationary(n, _weights(n, n - 1))
        if "," in arg:
            return Stationary(n, _weights(n, [float(v) for v in arg.split(",")]))
        try:
            return Stationary(n, _weights(n, int(arg)))
        except ValueError:
            raise ConfigError(f"cannot parse stationary action {arg!r}") from None
    if kind == "replay":
        if not arg:
            raise ConfigError("replay adversary needs a file: replay:<path>")
        return Replay(n, read_replay(arg))
    raise ConfigError(f"unknown adversary {spec!r}")
