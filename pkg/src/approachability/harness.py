"""Seeded simulations, CSV traces, rate fits and one-shot verdicts."""

from __future__ import annotations

import csv
import io as _io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .adversaries import make_adversary
from .displacement import DisplacementTarget, hat_b_responses, is_convex_game, theorem5_check
from .exceptions import ApproachabilityError, ConfigError, InvalidArgumentError
from .full import b_set_response, convex_approachable_full
from .game import Game
from .geometry import TargetSet, distance_and_projection
from .grids import UNDETERMINED
from .informative import InformativeStrategy, MeasureTarget, ProductGrid, theorem3_check
from .io import file_digest, load_game, load_target_spec, target_from_json
from .partial import BlockConfig, BlockStrategy, convex_approachable_partial

MODES = ("full", "partial", "informative", "displacement")
ROLES = {"player": 1, "adversary": 2, "nature": 3}

COLUMNS = {
    "full": ("stage", "distance", "slack", "seed", "action_p1", "action_p2"),
    "partial": ("stage", "distance", "explored", "seed", "action_p1", "action_p2", "signal"),
    "informative": ("stage", "W2_to_target", "slack", "projection_cost", "seed", "x", "xi"),
    "displacement": ("stage", "hat_w2", "slack", "projection_cost", "seed", "x", "y"),
}


def stream(seed: int, role: str) -> np.random.Generator:
    """Independent counter-based generator for one role of one run."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), ROLES[role]])))


@dataclass
class RunConfig:
    mode: str
    target: str
    game: str | None = None
    horizon: int = 1000
    seed: int = 0
    grid_density: int = 5
    eta: float = 0.1
    block_length: int = 100
    doubling: bool = False
    adversary: str = "uniform"
    epsilon: float = 0.01
    sampled: bool = False
    replicas: int = 1
    smoothing_iterations: int = 4
    adversary_density: int = 10

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.mode != "displacement" and not self.game:
            raise ConfigError(f"mode {self.mode} needs --game")
        if not self.target:
            raise ConfigError("--target is required")
        for name in ("horizon", "grid_density", "block_length", "replicas", "adversary_density"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        return self


@dataclass
class Trace:
    columns: tuple[str, ...]
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        values = [r[k] for r in self.rows]
        try:
            return np.array(values, dtype=float)
        except ValueError:
            return np.array(values, dtype=object)

    def vectors(self, name: str) -> np.ndarray:
        """Decode a column of ``;``-joined vectors (mixed actions) into a 2-D array."""
        k = self.columns.index(name)
        return np.array([[float(t) for t in str(r[k]).split(";")] for r in self.rows])

    @property
    def stages(self) -> np.ndarray:
        return self.column("stage")

    @property
    def distances(self) -> np.ndarray:
        return self.column(self.columns[1])

    def to_csv(self) -> str:
        buf = _io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}: {json.dumps(self.metadata[key], sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        writer.writerows(self.rows)
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def read(cls, path) -> "Trace":
        meta, body = {}, []
        for line in Path(path).read_text().splitlines():
            if line.startswith("# "):
                key, _, value = line[2:].partition(": ")
                meta[key] = json.loads(value)
            elif line:
                body.append(line)
        if not body:
            raise ConfigError(f"{path}: no header line")
        reader = csv.reader(body)
        columns = tuple(next(reader))
        rows = [tuple(_parse_cell(c) for c in r) for r in reader]
        return cls(columns, rows, meta)


def _parse_cell(text: str):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _fmt(v) -> str:
    return ";".join(repr(float(t)) for t in np.atleast_1d(v))


def _metadata(config: RunConfig, seed: int) -> dict:
    echo = asdict(config)
    echo["seed"] = int(seed)
    inputs = {}
    for name in ("game", "target"):
        path = getattr(config, name)
        if path:
            inputs[name] = "sha256:" + file_digest(path)
    return {"config": echo, "inputs": inputs}


def _distances(target: TargetSet, Z: np.ndarray) -> np.ndarray:
    return np.min([np.linalg.norm(Z - p.project_many(Z), axis=1) for p in target.pieces], axis=0)


def _adversary(config: RunConfig, n: int, density: int | None = None):
    return make_adversary(config.adversary, n, density or config.adversary_density)


def _load_game(config: RunConfig) -> Game:
    return load_game(config.game)


def _payoff_target(config: RunConfig, game: Game) -> TargetSet:
    spec = load_target_spec(config.target)
    if spec.get("kind") == "rho_preimage":
        spec = spec["target"]
    target = target_from_json(spec)
    if target.dim != game.payoff_dim:
        raise ConfigError(f"{config.target}: target has dimension {target.dim}, payoffs have {game.payoff_dim}")
    return target


def _run_full(config: RunConfig, seed: int) -> Trace:
    game = _load_game(config)
    target = _payoff_target(config, game)
    rng_p, rng_a = stream(seed, "player"), stream(seed, "adversary")
    adversary = _adversary(config, game.num_actions_p2)
    trace = Trace(COLUMNS["full"], metadata=_metadata(config, seed))
    total = np.zeros(game.payoff_dim)
    comp = np.zeros(game.payoff_dim)
    mean = None
    for n in range(1, config.horizon + 1):
        cert = b_set_response(game, target, game.payoffs[0, 0] if mean is None else mean)
        x = cert.x_star
        rows = np.einsum("i,ijk->jk", x, game.payoffs)

        def score(Y, n=n, total=total, rows=rows):
            return _distances(target, (total + Y @ rows) / n)

        y = adversary.act(rng_a, n, score)
        if config.sampled:
            i = int(rng_p.choice(game.num_actions_p1, p=_clean(x)))
            j = int(rng_a.choice(game.num_actions_p2, p=_clean(y)))
            payoff, a1, a2 = game.payoffs[i, j], i, j
        else:
            payoff, a1, a2 = y @ rows, _fmt(x), _fmt(y)
        v = payoff - comp
        t = total + v
        comp = (t - total) - v
        total = t
        mean = total / n
        dist = distance_and_projection(target, mean)[0]
        trace.rows.append((n, dist, float(cert.slack), seed, a1, a2))
    return trace


def _clean(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _run_partial(config: RunConfig, seed: int) -> Trace:
    game = _load_game(config)
    C = _payoff_target(config, game)
    if not C.convex_flag:
        raise ConfigError("partial mode needs a convex target")
    grid = ProductGrid.for_game(game, config.grid_density)
    inner = InformativeStrategy(MeasureTarget.rho_preimage(game, C.polytope, grid), config.epsilon,
                                config.smoothing_iterations)
    block = BlockConfig(config.block_length, config.eta, config.doubling).validate(game.num_actions_p1)
    strategy = BlockStrategy(game, block, inner, stream(seed, "player"))
    rng_a, rng_s = stream(seed, "adversary"), stream(seed, "nature")
    adversary = _adversary(config, game.num_actions_p2)
    trace = Trace(COLUMNS["partial"], metadata=_metadata(config, seed))
    total = np.zeros(game.payoff_dim)
    for n in range(1, config.horizon + 1):
        i = strategy.act()
        rows = np.einsum("i,ijk->jk", strategy._x, game.payoffs)

        def score(Y, n=n, total=total, rows=rows):
            return _distances(C, (total + Y @ rows) / n)

        y = adversary.act(rng_a, n, score)
        j = int(rng_a.choice(game.num_actions_p2, p=_clean(y)))
        s = int(rng_s.choice(game.num_signals, p=game.signal_law[i, j]))
        explored = strategy._explored
        strategy.observe(i, s)
        total = total + game.payoffs[i, j]
        dist = distance_and_projection(C, total / n)[0]
        trace.rows.append((n, dist, int(explored), seed, i, j, game.signal_labels[s]))
    trace.metadata["blocks"] = {"skipped": strategy.skipped_blocks, "epochs_completed": strategy.epoch}
    if config.doubling:
        trace.metadata["doubling"] = {"N_k": "block * 2**k", "eta_k": "eta * 2**(-k/3)",
                                      "blocks_per_epoch": block.blocks_per_epoch}
    return trace


def informative_target(game: Game, spec: dict, grid: ProductGrid) -> MeasureTarget:
    """Measure target from a file description.

    ``{"kind": "rho_preimage", "target": <payoff target>}`` or ``{"kind": "linear", ...}``
    with either ``A_ub``/``b_ub``/``A_eq``/``b_eq`` arrays or a ``constraints`` list of
    ``{"a": [...], "op": "<=" | ">=" | "==", "b": value}`` over the product-grid weights
    (atom ``(a, b)`` at index ``a * n_xi + b``).
    """
    kind = spec.get("kind", "rho_preimage")
    if kind == "linear":
        if "constraints" in spec:
            return MeasureTarget.linear(grid, *_constraint_rows(spec["constraints"], grid.size))
        return MeasureTarget.linear(grid, spec.get("A_ub"), spec.get("b_ub"), spec.get("A_eq"), spec.get("b_eq"))
    if kind == "rho_preimage":
        inner = spec.get("target", spec)
        target = target_from_json(inner)
        if not target.convex_flag:
            raise ConfigError("rho_preimage needs a convex payoff target")
        return MeasureTarget.rho_preimage(game, target.polytope, grid)
    raise ConfigError(f"unknown measure target kind {kind!r}")


def _constraint_rows(items, size: int):
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for k, c in enumerate(items):
        try:
            a, op, b = np.asarray(c["a"], dtype=float), c.get("op", "<="), float(c["b"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"constraint {k}: expected {{'a': [...], 'op': ..., 'b': ...}}") from None
        if a.shape != (size,):
            raise ConfigError(f"constraint {k}: 'a' has length {a.size}, the product grid has {size} atoms")
        if op == "<=":
            A_ub.append(a), b_ub.append(b)
        elif op == ">=":
            A_ub.append(-a), b_ub.append(-b)
        elif op == "==":
            A_eq.append(a), b_eq.append(b)
        else:
            raise ConfigError(f"constraint {k}: unknown op {op!r}")
    return A_ub or None, b_ub or None, A_eq or None, b_eq or None


def _run_informative(config: RunConfig, seed: int) -> Trace:
    game = _load_game(config)
    grid = ProductGrid.for_game(game, config.grid_density)
    target = informative_target(game, load_target_spec(config.target), grid)
    strategy = InformativeStrategy(target, config.epsilon, config.smoothing_iterations)
    rng_a = stream(seed, "adversary")
    # greedy search over pure flags keeps the per-stage cost at one LP per grid flag
    adversary = _adversary(config, grid.n_xi, 1 if config.adversary == "best_response" else None)
    trace = Trace(COLUMNS["informative"], metadata=_metadata(config, seed))
    for n in range(1, config.horizon + 1):
        resp = strategy.respond()

        def score(Xi, resp=resp):
            base = strategy.state._sum.total
            return np.array([target.distance(grid.measure((base + np.outer(resp.x, xi).ravel()) / n))
                             for xi in Xi])

        xi = adversary.act(rng_a, n, score)
        strategy.play(xi)
        dist = target.distance(strategy.state.theta_bar)
        trace.rows.append((n, dist, resp.slack, resp.projection_cost, seed, _fmt(resp.x), _fmt(xi)))
    return trace


def _displacement_target(config: RunConfig) -> DisplacementTarget:
    spec = load_target_spec(config.target)
    try:
        return DisplacementTarget.from_json(spec)
    except KeyError as exc:
        raise ConfigError(f"{config.target}: displacement target is missing key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{config.target}: malformed displacement target ({exc})") from None


def run_displacement_batch(config: RunConfig, seeds) -> list[Trace]:
    """Displacement runs for several seeds advanced in lockstep, vectorizing the projections.

    Each run owns its adversary and generator, so every trace equals the one produced
    by a single-seed call.
    """
    target = _displacement_target(config)
    seeds = [int(s) for s in seeds]
    dx, dy = target.dx, target.Xi.dim
    VY = target.Xi.vertices
    B = len(seeds)
    advs = [_adversary(config, len(VY)) for _ in seeds]
    rngs = [stream(s, "adversary") for s in seeds]
    traces = [Trace(COLUMNS["displacement"], metadata=_metadata(config, s)) for s in seeds]
    S = np.zeros((B, dx + dy))
    Cmp = np.zeros((B, dx + dy))
    D = target.D
    K2 = target.diameter ** 2
    prev = np.zeros(B)
    for n in range(1, config.horizon + 1):
        if n == 1:
            xs = np.tile(target.X.vertices[0], (B, 1))
            slacks, costs, projs = np.zeros(B), np.zeros(B), None
        else:
            xs, slacks, projs, q = hat_b_responses(S / (n - 1), target)
            costs = np.einsum("bd,bd->b", q, q)
        ys = np.empty((B, dy))
        for b in range(B):
            def score(L, b=b):
                Z = np.tile(S[b], (len(L), 1))
                Z[:, :dx] += xs[b]
                Z[:, dx:] += L @ VY
                Z /= n
                return np.linalg.norm(Z - D.project_many(Z), axis=1)
            ys[b] = advs[b].act(rngs[b], n, score) @ VY
        v = np.hstack([xs, ys]) - Cmp
        t = S + v
        Cmp = (t - S) - v
        S = t
        means = S / n
        if projs is not None:
            # one-step recursion of the approach argument, measured against the old projection
            lhs = np.sum((means - projs) ** 2, axis=1)
            bound = ((n - 1) / n) ** 2 * prev + K2 / n ** 2
            bad = (slacks <= 1e-12) & (lhs > bound + 1e-9)
            if np.any(bad):
                raise ApproachabilityError(f"stage {n}: distance recursion violated for seeds "
                                           f"{[seeds[b] for b in np.flatnonzero(bad)]}")
        dists = np.linalg.norm(means - D.project_many(means), axis=1)
        prev = dists ** 2
        for b in range(B):
            traces[b].rows.append((n, float(dists[b]), float(slacks[b]), float(costs[b]), seeds[b],
                                   _fmt(xs[b]), _fmt(ys[b])))
    return traces


def _run_one(config: RunConfig, seed: int) -> Trace:
    if config.mode == "full":
        return _run_full(config, seed)
    if config.mode == "partial":
        return _run_partial(config, seed)
    if config.mode == "informative":
        return _run_informative(config, seed)
    return run_displacement_batch(config, [seed])[0]


def run(config: RunConfig) -> Trace:
    """Single seeded run; identical configs give bit-identical traces."""
    config.validate()
    return _run_one(config, int(config.seed))


def run_replicas(config: RunConfig, workers: int | None = None) -> list[Trace]:
    """Runs with seeds ``seed, seed+1, ...``; displacement runs are batched, others use a process pool."""
    config.validate()
    seeds = [int(config.seed) + r for r in range(config.replicas)]
    if config.mode == "displacement":
        return run_displacement_batch(config, seeds)
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(seeds) == 1:
        return [_run_one(config, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
        return list(pool.map(_run_one, [config] * len(seeds), seeds))


def replica_path(out, r: int) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}_r{r}{out.suffix}")


def write_replicas(traces: list[Trace], out) -> Path:
    """Write one file per run, then merge them into ``out`` with a ``replica`` column."""
    for r, t in enumerate(traces):
        t.write(replica_path(out, r))
    merged = Trace(("replica",) + traces[0].columns, metadata=dict(traces[0].metadata))
    merged.metadata["replicas"] = len(traces)
    for r in range(len(traces)):
        part = Trace.read(replica_path(out, r))
        merged.rows.extend((r,) + tuple(row) for row in part.rows)
    merged.write(out)
    return Path(out)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    status: str = "ok"
    points: int = 0


def fit_rate(trace, burn_in: int = 0) -> FitResult:
    """Least-squares fit of ``log distance`` on ``log n`` over stages after ``burn_in``.

    Accepts a :class:`Trace` or a plain sequence of distances indexed from stage 1.
    Distances at or below 1e-12 are dropped.
    """
    if isinstance(trace, Trace):
        n, d = trace.stages, trace.distances
    else:
        d = np.asarray(trace, dtype=float)
        n = np.arange(1, len(d) + 1, dtype=float)
    if len(d) <= burn_in + 10:
        raise InvalidArgumentError(f"need more than burn_in + 10 = {burn_in + 10} stages, got {len(d)}")
    keep = (n > burn_in) & (d > 1e-12)
    if not np.any(keep):
        return FitResult(float("nan"), float("nan"), float("nan"), "converged-exactly", 0)
    if keep.sum() < 2:
        raise InvalidArgumentError("fewer than two positive distances after burn-in")
    u, v = np.log(n[keep]), np.log(d[keep])
    slope, intercept = np.polyfit(u, v, 1)
    resid = v - (slope * u + intercept)
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), r2, "ok", int(keep.sum()))


@dataclass
class CheckReport:
    verdict: str
    lines: list[str]
    result: object = None

    @property
    def exit_code(self) -> int:
        return 4 if self.verdict == UNDETERMINED else 0

    def text(self) -> str:
        return "\n".join(self.lines)


def _vec(v) -> str:
    return "(" + ", ".join(f"{float(t):.6g}" for t in np.atleast_1d(v)) + ")"


def _table(header: str, responses: dict, limit: int = 40) -> list[str]:
    lines = [header]
    for k, (key, x) in enumerate(sorted(responses.items())):
        if k == limit:
            lines.append(f"  ... {len(responses) - limit} more")
            break
        lines.append(f"  {_vec(key)} -> {_vec(x)}")
    return lines


def check(mode: str | None = None, game: str | None = None, target: str | None = None,
          grid_density: int = 5, convex_game: bool = False, seed: int = 0) -> CheckReport:
    """Decide approachability (or game convexity) for the given files and print witness tables."""
    if convex_game:
        if not game:
            raise ConfigError("--convex-game needs --game")
        report = is_convex_game(load_game(game), seed=seed)
        if report.convex:
            return CheckReport("convex", ["convex"], report)
        q = report.counterexample
        lines = ["not convex", f"  counterexample atoms {q.atoms.tolist()} weights {q.weights.tolist()}",
                 f"  excess {report.excess:.6g}"]
        return CheckReport("not convex", lines, report)
    if not target:
        raise ConfigError("check needs --target (or --convex-game)")
    if mode is None:
        mode = "displacement" if game is None else None
    if mode == "displacement":
        cfg = RunConfig("displacement", target)
        t5 = theorem5_check(_displacement_target(cfg), grid_density)
        lines = [t5.status]
        if not t5.yes:
            lines.append(f"  witness y {_vec(t5.witness_y)}  delta {t5.delta:.6g}")
        lines += _table("  y (barycentric) -> x (barycentric over X vertices)", t5.grid.responses)
        return CheckReport(t5.status, lines, t5)
    g = load_game(game)
    cfg = RunConfig(mode or "partial", target, game)
    if mode is None:
        mode = "full" if g.is_full_monitoring() else "partial"
    if mode == "informative":
        grid = ProductGrid.for_game(g, grid_density)
        mt = informative_target(g, load_target_spec(target), grid)
        t3 = theorem3_check(mt)
        status = "approachable" if t3.yes else "not_approachable"
        lines = [status]
        if not t3.yes:
            atoms = " + ".join(f"{w:.6g}*{_vec(grid.grid_Xi[b])}" for b, w in enumerate(t3.witness_xi) if w > 0)
            lines.append(f"  witness xi {atoms}  delta {t3.delta:.6g}")
        lines += _table("  xi -> x (weights over the action grid)", t3.responses)
        return CheckReport(status, lines, t3)
    C = _payoff_target(cfg, g)
    if mode == "full":
        v = convex_approachable_full(g, C.polytope, grid_density)
        lines = [v.status]
        if v.status == "not_approachable":
            lines.append(f"  witness y {_vec(v.witness_y)}  delta {v.margin:.6g}")
        lines += _table("  y -> x", v.grid.responses)
        return CheckReport(v.status, lines, v)
    if mode == "partial":
        v = convex_approachable_partial(g, C.polytope, grid_density)
        lines = [v.status]
        if v.status == "not_approachable":
            lines.append(f"  witness flag {v.witness_flag.laws.tolist()}  delta {v.margin:.6g}")
        lines += _table("  flag (barycentric over extreme flags) -> x", v.grid.responses)
        return CheckReport(v.status, lines, v)
    raise ConfigError(f"unknown check mode {mode!r}")


__all__ = ["RunConfig", "Trace", "FitResult", "CheckReport", "run", "run_replicas", "run_displacement_batch",
           "fit_rate", "check", "stream", "write_replicas", "informative_target"]
