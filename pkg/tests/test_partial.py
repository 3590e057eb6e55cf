import numpy as np
import pytest
from oracles import brute_force_partial

from approachability import BlockConfig, BlockStrategy, ConfigError, Flag, Game, InsufficientExplorationError
from approachability import Polytope, compatible_payoffs, convex_approachable_full, convex_approachable_partial
from approachability import flag_estimator
from approachability.grids import APPROACHABLE
from approachability.partial import FixedInner, doubling_schedule, partial_exclusion_margin

A, B = [1.0, 0.0], [0.0, 1.0]
BOX = Polytope.box([-10, -10], [10, 10])


def hull_set(cps):
    return sorted(tuple(np.round(v, 9)) for v in Polytope(cps.vertices).vertices)


def test_compatible_payoffs_examples(ex1):
    assert hull_set(compatible_payoffs(ex1, [1, 0], Flag([A, A]))) == [(0, -1), (1, -2)]
    assert hull_set(compatible_payoffs(ex1, [1, 0], Flag([B, B]))) == [(2, -4)]
    assert hull_set(compatible_payoffs(ex1, [0.5, 0.5], Flag([A, A]))) == [(0.5, -0.5), (1.5, -1.5)]


def test_halfplane_target_agrees_with_oracle(ex1):
    A_, b_ = np.array([[1.0, 1.0], [1, 0], [-1, 0], [0, 1], [0, -1]]), np.array([0.0, 10, 10, 10, 10])
    v = convex_approachable_partial(ex1, Polytope.from_halfspaces(A_, b_), 10)
    margin, slack = brute_force_partial(ex1.payoffs, ex1.signal_law, A_, b_)
    assert v.status == APPROACHABLE and margin <= slack


def test_whole_box_is_approachable(ex1):
    assert convex_approachable_partial(ex1, BOX, 5).status == APPROACHABLE


def test_not_approachable_fixture(ex1):
    C = Polytope.from_halfspaces([[0, -1], [1, 0], [-1, 0], [0, 1]], [1, 10, 10, 10])
    v = convex_approachable_partial(ex1, C, 5)
    assert v.status == "not_approachable"
    assert np.allclose(v.witness_flag.laws, [B, B])
    assert v.margin == pytest.approx(2)
    assert partial_exclusion_margin(ex1, C, v.witness_flag) == pytest.approx(2)


def test_full_monitoring_encoding_agrees(rng):
    for _ in range(8):
        g = Game.full_monitoring(rng.uniform(-1, 1, (2, 3, 2)))
        C = Polytope(rng.uniform(-1, 1, (5, 2)))
        assert convex_approachable_partial(g, C, 5).status == convex_approachable_full(g, C, 5).status


def _run_block(game, ys, eta, N, x, seed):
    rng = np.random.default_rng(seed)
    inner = FixedInner(x)
    strat = BlockStrategy(game, BlockConfig(N, eta), inner, rng)
    actions = []
    for t in range(N):
        i = strat.act()
        actions.append(i)
        j = int(rng.choice(game.num_actions_p2, p=ys))
        s = int(rng.choice(game.num_signals, p=game.signal_law[i, j]))
        strat.observe(i, s)
    return strat, inner, actions


def test_estimator_exact_for_pure_opponent(ex1):
    strat, inner, _ = _run_block(ex1, [0, 0, 1], 0.2, 100, [0.5, 0.5], 0)
    assert np.array_equal(strat.last_estimate.laws, [B, B])
    assert inner.fed[0] == Flag([B, B])
    strat, inner, _ = _run_block(ex1, [0, 1, 0], 0.2, 100, [1, 0], 1)
    assert np.array_equal(strat.last_estimate.laws, [A, A])


def test_estimator_requires_exploration(ex1):
    obs = [(0, "a", True), (1, "a", False)]
    with pytest.raises(InsufficientExplorationError):
        flag_estimator(obs, ex1)
    obs = [(0, "a", True), (1, "b", True), (1, "a", False)]
    assert np.allclose(flag_estimator(obs, ex1, project=False).laws, [A, [0.5, 0.5]])
    assert np.allclose(flag_estimator(obs, ex1, exploration_only=True, project=False).laws, [A, B])
    # both rows of the signal matrix coincide, so flags have equal rows
    assert np.allclose(flag_estimator(obs, ex1).laws, [[0.75, 0.25], [0.75, 0.25]])


def test_block_strategy_extremes(ex1):
    _, _, actions = _run_block(ex1, [1, 0, 0], 1.0, 400, [1, 0], 3)
    assert 150 < sum(actions) < 250
    strat = BlockStrategy(ex1, BlockConfig(50, 0.0), FixedInner([1, 0]), np.random.default_rng(0))
    assert all(strat.act() == 0 for _ in range(50))


def test_skipped_block_is_counted(ex1):
    strat = BlockStrategy(ex1, BlockConfig(2, 0.0), FixedInner([1, 0]), np.random.default_rng(0))
    for _ in range(2):
        strat.observe(strat.act(), 0)
    assert strat.skipped_blocks == 1


def test_block_config_validation():
    with pytest.raises(ConfigError):
        BlockConfig(10, 0.1).validate(2)
    BlockConfig(20, 0.1).validate(2)
    with pytest.raises(ConfigError):
        BlockConfig(10, 1.5)


def test_doubling_schedule():
    c0 = doubling_schedule(100, 0.2, 0)
    assert (c0.block_length, c0.eta) == (100, 0.2)
    c3 = doubling_schedule(100, 0.2, 3)
    assert c3.block_length == 800 and c3.eta == pytest.approx(0.1)
    # exploration share vanishes while per-row samples N_k eta_k grow
    etas = [doubling_schedule(100, 0.2, k).eta for k in range(30)]
    samples = [doubling_schedule(100, 0.2, k).block_length * e for k, e in enumerate(etas)]
    assert etas[-1] < 0.002 and np.all(np.diff(samples) > 0)
    lengths = np.array([100 * 2 ** k for k in range(30)])
    assert np.sum(lengths * etas) / np.sum(lengths) < 0.002
