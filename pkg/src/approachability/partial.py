"""Approachability under partial monitoring: compatible payoffs, the convex criterion,
and the block strategy that estimates flags from exploration stages."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from ._validation import check_positive_int, check_probability
from .exceptions import ConfigError, InsufficientExplorationError, InvalidArgumentError
from .full import _as_polytope, feasibility_check
from .game import Flag, Game, payoff_vertices, preimage_of_flag_cell, project_to_flag_set
from .geometry import Polytope, polytope_distance
from .grids import NOT_APPROACHABLE, GridVerdict, certify_simplex


@dataclass(frozen=True)
class CompatiblePayoffSet:
    vertices: np.ndarray

    @property
    def polytope(self) -> Polytope:
        return Polytope(self.vertices)

    def contains(self, z, tol: float = 1e-9) -> bool:
        return self.polytope.contains(z, tol)


def compatible_payoffs(game: Game, x, flag) -> CompatiblePayoffSet:
    """``P(x, flag)`` as the hull of payoffs at the preimage vertices of ``flag``."""
    return CompatiblePayoffSet(payoff_vertices(game, x, flag))


@dataclass
class PartialVerdict:
    status: str
    witness_flag: Flag | None
    margin: float
    grid: GridVerdict
    flag_vertices: np.ndarray

    @property
    def approachable(self) -> bool:
        return self.grid.approachable

    def witness_x(self, lam) -> np.ndarray | None:
        """Response at the grid flag with barycentric coordinates ``lam`` over the extreme flags."""
        return self.grid.response_at(lam)


def _flag_from_vector(game: Game, vec) -> Flag:
    laws = np.clip(np.asarray(vec, dtype=float).reshape(game.num_actions_p1, game.num_signals), 0.0, None)
    return Flag(laws / laws.sum(axis=1, keepdims=True))


def partial_exclusion_margin(game: Game, C, flag) -> float:
    """Lower bound on ``min_x max_y d(rho(x, y), C)`` over preimage vertices ``y`` of ``flag``.

    It is the margin a stationary opponent playing the worst preimage vertex enforces.
    """
    C = _as_polytope(C)
    ys = preimage_of_flag_cell(game, np.atleast_2d(_flag_vec(flag)))
    best = 0.0
    for y in ys:
        rows = np.einsum("j,ijk->ik", y, game.payoffs)
        best = max(best, polytope_distance(Polytope(rows), C))
    return best


def _flag_vec(flag) -> np.ndarray:
    return flag.vector if isinstance(flag, Flag) else np.asarray(flag, dtype=float).ravel()


def convex_approachable_partial(game: Game, C, grid_density: int, depth_cap: int = 3,
                                tol: float = 1e-9) -> PartialVerdict:
    """Grid certification of ``for all flags exists x: P(x, flag) in C``.

    Flags are parameterized by barycentric weights over the extreme flags.  A set of
    flags is handled at once through the vertices of its lifted preimage, so that a
    single ``x`` certified there covers every flag in their hull.
    """
    C = _as_polytope(C)
    V = game.flag_vertices
    inner = feasibility_check(game, C)

    def check(lams):
        flags = lams @ V
        return inner(preimage_of_flag_cell(game, flags))

    grid = certify_simplex(len(V), grid_density, check, depth_cap, tol)
    if grid.status == NOT_APPROACHABLE:
        flag = _flag_from_vector(game, grid.witness @ V)
        return PartialVerdict(grid.status, flag, partial_exclusion_margin(game, C, flag), grid, V)
    return PartialVerdict(grid.status, None, 0.0, grid, V)


def flag_estimator(observations: Sequence[tuple], game: Game, exploration_only: bool = False,
                   project: bool = True) -> Flag:
    """Row ``i``: empirical signal distribution over the block stages where ``i`` was played.

    Within a block the probability of playing ``i`` does not change, so every such stage
    is an unbiased draw of the block-average law; exploration guarantees each row is
    sampled.  ``exploration_only`` restricts the counts to exploration stages.

    Rows are tied together by the flag set, so by default the raw rows are replaced by
    their nearest flag.  Rows that already form a flag come back untouched, which keeps
    the estimate exact for deterministic signals against a pure opponent.
    """
    counts = np.zeros((game.num_actions_p1, game.num_signals))
    explored_rows = np.zeros(game.num_actions_p1, dtype=bool)
    for i, s, explored in observations:
        if explored:
            explored_rows[int(i)] = True
        elif exploration_only:
            continue
        s_idx = game.signal_labels.index(s) if isinstance(s, str) else int(s)
        counts[int(i), s_idx] += 1
    missing = np.flatnonzero(~explored_rows)
    if len(missing):
        raise InsufficientExplorationError(f"actions {missing.tolist()} were never explored")
    raw = Flag(counts / counts.sum(axis=1, keepdims=True))
    if not project or game.flag_set.contains(raw.vector, tol=1e-12):
        return raw
    return project_to_flag_set(game, raw)


@dataclass(frozen=True)
class BlockConfig:
    block_length: int
    eta: float
    doubling: bool = False
    blocks_per_epoch: int = 4

    def __post_init__(self):
        check_positive_int(self.block_length, "block_length")
        check_positive_int(self.blocks_per_epoch, "blocks_per_epoch")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")

    def validate(self, num_actions: int) -> "BlockConfig":
        if self.eta <= 0 or self.block_length < num_actions / self.eta:
            raise ConfigError(
                f"block length {self.block_length} is below |I|/eta = {num_actions / max(self.eta, 1e-300):.4g}")
        return self


def doubling_schedule(base_N: int, base_eta: float, k: int, num_actions: int | None = None) -> BlockConfig:
    """Epoch ``k``: ``N_k = base_N 2^k``, ``eta_k = base_eta 2^(-k/3)``, with eta raised to keep N_k >= |I|/eta_k."""
    if int(k) != k or k < 0:
        raise InvalidArgumentError(f"epoch index must be a nonnegative integer, got {k}")
    N = check_positive_int(base_N, "base_N") * 2 ** int(k)
    eta = float(base_eta) * 2.0 ** (-k / 3.0)
    if num_actions is not None and N * eta < num_actions:
        eta = min(1.0, num_actions / N)
    return BlockConfig(N, eta, doubling=True)


class InnerStrategy(Protocol):
    def prescription(self) -> np.ndarray: ...

    def observe(self, flag: Flag) -> None: ...


class FixedInner:
    """Inner strategy that always prescribes the same mixed action."""

    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)
        self.fed: list[Flag] = []

    def prescription(self) -> np.ndarray:
        return self.x

    def observe(self, flag: Flag) -> None:
        self.fed.append(flag)


@dataclass
class BlockStrategy:
    """Plays blocks of stages; each block is one stage of the inner strategy.

    With probability ``eta`` a stage explores (uniform action), otherwise the action
    is drawn from the inner strategy's mean mixed action.  At block end the explored
    signals give a flag estimate, which is projected on the flag set and handed to
    the inner strategy.
    """

    game: Game
    config: BlockConfig
    inner: InnerStrategy
    rng: np.random.Generator
    stage_in_block: int = 0
    epoch: int = 0
    block_in_epoch: int = 0
    observations: list = field(default_factory=list)
    current: BlockConfig | None = None
    last_estimate: Flag | None = None
    skipped_blocks: int = 0
    _x: np.ndarray | None = None
    _explored: bool = False

    def __post_init__(self):
        self.current = self._config_for(0)

    def _config_for(self, epoch: int) -> BlockConfig:
        if not self.config.doubling:
            return self.config
        return doubling_schedule(self.config.block_length, self.config.eta, epoch, self.game.num_actions_p1)

    def act(self) -> int:
        if self.stage_in_block == 0:
            self._x = check_probability(self.inner.prescription(), self.game.num_actions_p1, "prescription", 1e-9)
        n_i = self.game.num_actions_p1
        self._explored = bool(self.rng.random() < self.current.eta)
        if self._explored:
            return int(self.rng.integers(n_i))
        return int(self.rng.choice(n_i, p=self._x))

    def observe(self, action: int, signal) -> Flag | None:
        """Record the stage outcome; returns the flag fed to the inner strategy at block end."""
        self.observations.append((action, signal, self._explored))
        self.stage_in_block += 1
        if self.stage_in_block < self.current.block_length:
            return None
        fed = None
        try:
            self.last_estimate = flag_estimator(self.observations, self.game, project=False)
            fed = project_to_flag_set(self.game, self.last_estimate)
            self.inner.observe(fed)
        except InsufficientExplorationError:
            self.skipped_blocks += 1
        self.observations = []
        self.stage_in_block = 0
        self.block_in_epoch += 1
        if self.config.doubling and self.block_in_epoch >= self.config.blocks_per_epoch:
            self.epoch += 1
            self.block_in_epoch = 0
            self.current = self._config_for(self.epoch)
        return fed


def block_strategy_step(strategy: BlockStrategy) -> int:
    return strategy.act()
