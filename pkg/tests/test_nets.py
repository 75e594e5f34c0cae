import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaosbounds import bounds, nets
from chaosbounds.errors import CapacityError, ValidationError
from chaosbounds.norms import rho_alpha
from chaosbounds.tensor import CoefficientTensor

from conftest import random_tensor


def normalized(seed, dims=(2, 2, 2), M=1):
    g = np.random.default_rng(seed)
    return bounds.normalize_DM(CoefficientTensor(g.standard_normal(dims)), M)[0]


def euclid(p, q):
    return float(np.linalg.norm(np.asarray(p) - np.asarray(q)))


# -- W_I_x -------------------------------------------------------------------

def test_W_vanishes_as_t_goes_to_zero(rng):
    A = random_tensor(rng, (2, 3, 2))
    A = A.scaled(1 / A.frobenius())
    x = [np.zeros(2), np.full(3, 0.5)]
    assert nets.W_I_x(A, x, [1], 1e-6, 2000, 1).estimate < 1e-4


@pytest.mark.parametrize("I", [[1], [2], [1, 2]])
def test_W_homogeneity_paired(rng, I):
    A = random_tensor(rng, (2, 2, 3))
    x = [np.array([0.6, 0.0]), np.array([0.0, -0.3])]
    a = nets.W_I_x(A, x, I, 0.5, 4000, 11)
    b = nets.W_I_x(A, x, I, 1.0, 4000, 11)
    k = 2 ** len(I)
    assert b.estimate == pytest.approx(k * a.estimate, rel=1e-12)
    assert abs(b.estimate - k * a.estimate) <= 3 * math.hypot(b.std_error, k * a.std_error)


def test_W_against_predicted_bound():
    A = normalized(3)
    pred = bounds.contracted_moment_prediction(A, [np.zeros(2)] * 2, [1, 2], 1.0, 1)
    assert pred == 1.0
    st_ = nets.W_I_x(A, [np.zeros(2)] * 2, [1, 2], 1.0, 20000, 5)
    assert st_.estimate <= pred + 3 * st_.std_error
    assert st_.extra == {"I": [1, 2]} and st_.statistic == "W"


def test_W_validation(rng):
    A = random_tensor(rng, (2, 2, 2))
    x = [np.zeros(2)] * 2
    for bad in ([], [3], [0]):
        with pytest.raises(ValidationError):
            nets.W_I_x(A, x, bad, 1.0, 10, 0)
    with pytest.raises(ValidationError):
        nets.W_I_x(A, x, [1], 0.0, 10, 0)


# -- small-ball propositions ---------------------------------------------------

def test_two_norm_small_ball_euclidean_example():
    chk = nets.two_norm_small_ball_check(nets.euclidean_norm, nets.euclidean_norm, np.zeros(2), 1.0, 20000, 2)
    assert chk.bound == pytest.approx(0.5 * math.exp(-0.5), rel=1e-15)
    assert chk.estimate > 0.99 and chk.passed


def test_two_norm_small_ball_large_t():
    chk = nets.two_norm_small_ball_check(nets.euclidean_norm, nets.euclidean_norm, np.array([0.6, 0.8]), 50.0, 20000, 4)
    assert chk.bound == pytest.approx(0.5, rel=1e-3)
    assert chk.estimate >= 0.5 - 3 * chk.std_error and chk.passed


def test_two_norm_small_ball_zero_pseudonorm_is_vacuous():
    x = np.array([0.3, -0.2, 0.1])
    zero = nets.linear_pseudonorm(np.zeros((2, 3)))
    a = nets.two_norm_small_ball_check(zero, nets.euclidean_norm, x, 0.5, 5000, 9)
    b = nets.two_norm_small_ball_check(nets.euclidean_norm, nets.euclidean_norm, x, 0.5, 5000, 9)
    assert a.estimate == b.estimate and a.thresholds[0] == 0.0


def test_two_norm_small_ball_validation():
    with pytest.raises(ValidationError):
        nets.two_norm_small_ball_check(nets.euclidean_norm, nets.euclidean_norm, np.array([1.0, 1.0]), 1.0, 10, 0)
    with pytest.raises(ValidationError):
        nets.two_norm_small_ball_check(nets.euclidean_norm, nets.euclidean_norm, np.zeros(2), -1.0, 10, 0)


def test_chaos_small_ball_examples():
    A = CoefficientTensor(np.eye(3))
    chk = nets.chaos_small_ball_check(A, [np.array([0.5, 0.0, 0.0])], 1.0, 20000, 3)
    assert chk.bound == pytest.approx(0.5 * math.exp(-0.5), rel=1e-15) and chk.passed
    big = nets.chaos_small_ball_check(nets.identity_embedding(2), [np.zeros(2)] * 2, 100.0, 20000, 3)
    assert big.bound == pytest.approx(0.25, rel=1e-3) and big.passed
    zero = nets.chaos_small_ball_check(CoefficientTensor(np.zeros((2, 2, 2))), [np.zeros(2)] * 2, 0.5, 1000, 3)
    assert zero.estimate == 1.0 and zero.passed


def test_chaos_small_ball_guards():
    with pytest.raises(CapacityError):
        nets.chaos_small_ball_check(CoefficientTensor(np.zeros((1,) * 12)), [np.zeros(1)] * 11, 1.0, 10, 0)
    with pytest.raises(ValidationError):
        nets.chaos_small_ball_check(CoefficientTensor(np.eye(2)), [np.array([2.0, 0.0])], 1.0, 10, 0)


def test_identity_embedding_is_euclidean(rng):
    E = nets.identity_embedding(3)
    x, y = rng.standard_normal(3), rng.standard_normal(3)
    from chaosbounds.norms import chaos_vector
    assert np.linalg.norm(chaos_vector(E, [x, y])) == pytest.approx(np.linalg.norm(x) * np.linalg.norm(y))
    assert nets.nonempty_subsets(3) == [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]


# -- greedy nets -----------------------------------------------------------------

def test_greedy_net_examples(rng):
    pts = [np.array([float(i), 0.0]) for i in range(5)]
    assert nets.greedy_net(pts, euclid, 0.5).cardinality == 5
    assert nets.greedy_net(pts[:1], euclid, 0.0).cardinality == 1
    r = np.sqrt(rng.uniform(size=100))
    ang = rng.uniform(0, 2 * np.pi, 100)
    cloud = list(np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1))
    net = nets.greedy_net(cloud, euclid, 0.5)
    assert net.covering_ok and net.packing_ok and net.covered_count == 100
    assert net.cardinality <= 25
    with pytest.raises(ValidationError):
        nets.greedy_net([], euclid, 1.0)


@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=40),
       st.floats(0, 2))
def test_greedy_net_certificates(raw, two_u):
    pts = [np.array(p) for p in raw]
    net = nets.greedy_net(pts, euclid, two_u)
    assert net.packing_ok and net.covering_ok
    for i, c in enumerate(net.assignment):
        assert euclid(pts[i], pts[c]) <= two_u
    for a, b in itertools.combinations(net.center_indices, 2):
        assert euclid(pts[a], pts[b]) > two_u


# -- class membership and partitioning ---------------------------------------------

def test_membership_examples():
    A = normalized(0)
    p = nets.UClassParams(1, 0, 5, 3)
    assert nets.check_U_membership(A, p, [[np.zeros(2)] * 2])[0]
    u = nets.random_half_ball_set((2, 2), 1, 4)[0]
    assert nets.check_U_membership(A, p, [u, u])[0]
    ok, bad = nets.check_U_membership(A, p, [[np.array([1.5, 0.0]), np.zeros(2)]])
    assert not ok and bad[0].clause == "ball" and bad[0].margin == pytest.approx(-0.5)
    ok, bad = nets.check_U_membership(A, nets.UClassParams(1, 0, 1, 3), [u, u])
    assert not ok and bad[0].clause == "cardinality"
    with pytest.raises(ValidationError):
        nets.check_U_membership(A, nets.UClassParams(1, 0, 1, 4), [u])


def test_class_thresholds():
    p = nets.UClassParams(4, 1, 3, 3)
    assert p.alpha_threshold == 0.5 * 4 ** -0.5
    assert p.rho_threshold == 0.25 / 4
    assert p.rho_I_threshold(1) == 0.25 / 2
    assert p.advanced().N == 3
    with pytest.raises(ValidationError):
        nets.UClassParams(1, 0, 1, 2)


def test_partition_single_zero():
    A = normalized(1)
    rep = nets.partition_U(A, nets.UClassParams(1, 0, 1, 3), [[np.zeros(2)] * 2])
    assert rep.cardinality == 1
    assert rep.parts[0].shift_index == 0 and all(not np.any(v) for v in rep.parts[0].shift)


def test_partition_close_points_give_one_part():
    A = normalized(2)
    p = nets.UClassParams(1, 0, 3, 3)
    base = [np.array([0.2, -0.1]), np.array([0.0, 0.15])]
    eps = 1e-4
    U = [[b + eps * k for b in base] for k in range(3)]
    rep = nets.partition_U(A, p, U)
    assert rep.cardinality == 1
    assert rep.parts[0].shift_index == 0


@pytest.mark.parametrize("seed", range(4))
def test_partition_random_half_ball(seed):
    A = normalized(seed)
    p = nets.UClassParams(1, 0, 20, 3)
    U = nets.random_half_ball_set((2, 2), 20, seed)
    rep = nets.partition_U(A, p, U, seed=seed)
    assert all(rep.checks[k] for k in ("union_disjoint", "membership_next_level", "rho_I"))
    members = sorted(i for part in rep.parts for i in part.member_indices)
    assert members == list(range(20))
    for part in rep.parts:
        shift = [np.asarray(v) for v in part.shift]
        for i, sh in zip(part.member_indices, part.shifted):
            for a, b, s in zip(U[i], sh, shift):
                assert np.allclose(b + s, a, atol=1e-15)
        assert nets.check_U_membership(A, p.advanced(), part.shifted)[0]
        assert not nets.contracted_rho_violations(A, p, part.shift, part.shifted)
    assert rep.proof_t == 0.25
    assert rep.log2_cardinality_budget == 1.0


def test_partition_rejects_non_members():
    A = normalized(0)
    with pytest.raises(ValidationError):
        nets.partition_U(A, nets.UClassParams(1, 0, 2, 3), [[np.array([2.0, 0.0]), np.zeros(2)]])


def test_contracted_slot_sets():
    assert nets.contracted_slot_sets(3) == [(1,), (2,)]
    assert nets.contracted_slot_sets(4) == [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3)]


def test_rho_alpha_triangle_on_half_ball(rng):
    A = normalized(7)
    U = nets.random_half_ball_set((2, 2), 3, 7)
    a, b, c = U
    assert rho_alpha(A, a, c) <= rho_alpha(A, a, b) + rho_alpha(A, b, c) + 1e-12


# -- the order-2 supremum -----------------------------------------------------------

def test_sup_over_UN_matches_convex_solver(rng):
    cp = pytest.importorskip("cvxpy")
    for trial in range(5):
        X = rng.standard_normal((3, 4))
        X /= np.linalg.norm(X)
        A = CoefficientTensor(X)
        g = rng.standard_normal(4)
        for M, N in ((1, 0), (4, 1)):
            ub, lb = nets.sup_over_UN_d2(A, g, M, N)
            u = cp.Variable(3)
            rho = 2.0 ** (-N) * M ** -0.5
            prob = cp.Problem(cp.Maximize(u @ (X @ g)), [cp.norm(u) <= 1, cp.norm(X.T @ u) <= rho])
            prob.solve()
            assert lb <= ub + 1e-12
            assert ub == pytest.approx(prob.value, rel=1e-5, abs=1e-7)
            assert lb == pytest.approx(prob.value, rel=1e-5, abs=1e-7)


def test_sup_over_UN_degenerate():
    assert nets.sup_over_UN_d2(CoefficientTensor(np.zeros((2, 2))), np.ones(2), 1) == (0.0, 0.0)
    with pytest.raises(ValidationError):
        nets.sup_over_UN_d2(CoefficientTensor(np.zeros((2, 2, 2))), np.ones(2), 1)


def test_sup_second_moment_d2(rng):
    X = rng.standard_normal((3, 3))
    A = CoefficientTensor(X / np.linalg.norm(X))
    chk = nets.sup_second_moment_d2_check(A, 2, 2000, 8)
    assert chk.bound == 16.0 and chk.passed and chk.max_gap < 1e-6
    with pytest.raises(ValidationError):
        nets.sup_second_moment_d2_check(CoefficientTensor(2 * np.eye(2)), 1, 10, 0)
