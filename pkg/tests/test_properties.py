"""Property tests. Each draws a seed and builds its random instance from it."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import permutation_w2_squared

from approachability import DiscreteMeasure, Flag, Game, Polytope, TargetSet, compatible_payoffs, flag_estimator
from approachability import displacement_interpolate, project_measure, w1, w2, w2_distance
from approachability.displacement import HatState, hat_update
from approachability.game import flag_of, flag_preimage_vertices, mixed_payoff
from approachability.geometry import distance_and_projection
from approachability.transport import LinearConstraints

seeds = st.integers(0, 2 ** 32 - 1)
fast = settings(max_examples=40, deadline=None)


def random_game(rng, full=False):
    nI, nJ, k = rng.integers(1, 4), rng.integers(1, 4), rng.integers(1, 3)
    payoffs = rng.uniform(-1, 1, (nI, nJ, k))
    if full:
        return Game.full_monitoring(payoffs)
    ns = rng.integers(1, 3)
    if rng.random() < 0.5:
        law = np.eye(ns)[rng.integers(ns, size=(nI, nJ))]
    else:
        law = rng.dirichlet(np.ones(ns), size=(nI, nJ))
    return Game(payoffs, law)


def random_measure(rng, n=None, d=2):
    n = n or rng.integers(1, 5)
    return DiscreteMeasure(rng.normal(size=(n, d)), rng.dirichlet(np.ones(n)))


@fast
@given(seeds)
def test_payoff_is_bilinear(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng)
    x, y = rng.dirichlet(np.ones(g.num_actions_p1)), rng.dirichlet(np.ones(g.num_actions_p2))
    pure = sum(x[i] * mixed_payoff(g, np.eye(g.num_actions_p1)[i], y) for i in range(g.num_actions_p1))
    assert np.allclose(mixed_payoff(g, x, y), pure, atol=1e-12)


@fast
@given(seeds)
def test_flag_is_linear(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng)
    y1, y2 = rng.dirichlet(np.ones(g.num_actions_p2), size=2)
    t = rng.random()
    mixed = flag_of(g, t * y1 + (1 - t) * y2).vector
    assert np.allclose(mixed, t * flag_of(g, y1).vector + (1 - t) * flag_of(g, y2).vector, atol=1e-12)


@fast
@given(seeds)
def test_flag_preimage_is_the_fibre(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng)
    flag = flag_of(g, rng.dirichlet(np.ones(g.num_actions_p2)))
    V = flag_preimage_vertices(g, flag)
    for v in V:
        assert np.allclose(flag_of(g, v).vector, flag.vector, atol=1e-9)
    mix = rng.dirichlet(np.ones(len(V))) @ V
    assert np.allclose(flag_of(g, mix).vector, flag.vector, atol=1e-9)


@fast
@given(seeds)
def test_full_monitoring_preimage_of_pure_action(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng, full=True)
    y = np.eye(g.num_actions_p2)[rng.integers(g.num_actions_p2)]
    assert np.allclose(flag_preimage_vertices(g, flag_of(g, y)), [y], atol=1e-9)


@fast
@given(seeds)
def test_true_payoff_is_compatible(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng)
    x, y = rng.dirichlet(np.ones(g.num_actions_p1)), rng.dirichlet(np.ones(g.num_actions_p2))
    P = Polytope(compatible_payoffs(g, x, flag_of(g, y)).vertices)
    assert P.distance(mixed_payoff(g, x, y)) <= 1e-9


@fast
@given(seeds)
def test_full_monitoring_compatible_set_is_a_point(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng, full=True)
    x, y = rng.dirichlet(np.ones(g.num_actions_p1)), rng.dirichlet(np.ones(g.num_actions_p2))
    V = compatible_payoffs(g, x, flag_of(g, y)).vertices
    assert np.allclose(V, mixed_payoff(g, x, y)[None], atol=1e-12)


@fast
@given(seeds)
def test_projection_variational_inequality(seed):
    rng = np.random.default_rng(seed)
    d = rng.integers(1, 4)
    P = Polytope(rng.normal(size=(d + 3, d)))
    z = 3 * rng.normal(size=d)
    p = P.project(z)
    assert np.all((P.vertices - p) @ (z - p) <= 1e-9)


@fast
@given(seeds)
def test_distance_is_one_lipschitz(seed):
    rng = np.random.default_rng(seed)
    target = TargetSet.union([Polytope(rng.normal(size=(4, 2))), Polytope(rng.normal(size=(3, 2)) + 3)])
    z, w = 4 * rng.normal(size=(2, 2))
    dz, dw = distance_and_projection(target, z)[0], distance_and_projection(target, w)[0]
    assert abs(dz - dw) <= np.linalg.norm(z - w) + 1e-9


@fast
@given(seeds)
def test_convex_projection_is_unique(seed):
    rng = np.random.default_rng(seed)
    target = TargetSet.convex(Polytope(rng.normal(size=(5, 2))))
    projections = distance_and_projection(target, 3 * rng.normal(size=2))[1]
    assert all(np.allclose(p, projections[0], atol=1e-9) for p in projections)


@fast
@given(seeds)
def test_w2_matches_permutations(seed):
    rng = np.random.default_rng(seed)
    n, d = rng.integers(2, 6), rng.integers(1, 4)
    a, b = rng.normal(size=(n, d)), rng.normal(size=(n, d))
    assert abs(w2(DiscreteMeasure(a), DiscreteMeasure(b)).squared_cost - permutation_w2_squared(a, b)) <= 1e-9


@fast
@given(seeds)
def test_w2_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    mu, nu, la = (random_measure(rng) for _ in range(3))
    assert w2_distance(mu, mu) <= 1e-9
    assert abs(w2_distance(mu, nu) - w2_distance(nu, mu)) <= 1e-10
    assert w2_distance(mu, la) <= w2_distance(mu, nu) + w2_distance(nu, la) + 1e-8


@fast
@given(seeds)
def test_w1_below_w2(seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_measure(rng), random_measure(rng)
    assert w1(mu, nu) <= w2_distance(mu, nu) + 1e-9


def canonical(m):
    order = np.lexsort(m.atoms.T[::-1])
    return np.column_stack([m.atoms[order], m.weights[order]])


@fast
@given(seeds)
def test_interpolation_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    mu, nu = random_measure(rng), random_measure(rng)
    t = rng.random()
    forward, backward = displacement_interpolate(mu, nu, t), displacement_interpolate(nu, mu, 1 - t)
    # generic instances have a unique optimal plan, so the interpolants coincide atom by atom
    a, b = canonical(forward), canonical(backward)
    assert a.shape == b.shape and np.abs(a - b).max() <= 1e-10


@fast
@given(seeds)
def test_projection_cost_vanishes_exactly_on_feasible_measures(seed):
    rng = np.random.default_rng(seed)
    support = rng.normal(size=(4, 1))
    weights = rng.dirichlet(np.ones(4))
    mu = DiscreteMeasure(support, weights, merge=False)
    bound = rng.uniform(0, 1)
    cons = LinearConstraints.build(4, A_ub=[[1, 0, 0, 0]], b_ub=[bound])
    cost = project_measure(mu, support, cons)[1].squared_cost
    if weights[0] <= bound - 1e-9:
        assert cost <= 1e-9
    elif weights[0] > bound + 1e-6:
        assert cost > 1e-12


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_dirac_closure(seed):
    rng = np.random.default_rng(seed)
    dx, dy = rng.integers(1, 3), rng.integers(1, 3)
    s = HatState.empty(dx, dy)
    xs, ys = rng.random((30, dx)), rng.random((30, dy))
    for x, y in zip(xs, ys):
        s = hat_update(s, x, y)
    assert len(s.theta_hat) == 1
    assert np.allclose(s.x_bar, xs.mean(axis=0), atol=1e-12)
    assert np.allclose(s.y_bar, ys.mean(axis=0), atol=1e-12)


def test_estimator_exact_on_deterministic_signals():
    g = Game(np.zeros((2, 3, 1)), np.eye(2)[[[0, 0, 1], [1, 0, 0]]], signal_labels=["a", "b"])
    for j in range(3):
        obs = [(i, "ab"[int(g.signal_law[i, j, 1])], True) for i in (0, 1, 0, 1)]
        assert np.array_equal(flag_estimator(obs, g).laws, flag_of(g, np.eye(3)[j]).laws)


def test_flag_type():
    assert Flag([[1, 0]]) == Flag([[1.0, 0.0]])
