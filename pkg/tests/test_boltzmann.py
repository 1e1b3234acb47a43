import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dualflat import boltzmann as bm
from dualflat import exp_family as ef
from dualflat.boltzmann import WeightMatrix

LOG2 = math.log(2)


def sym(n, rng, scale=1.0):
    a = rng.uniform(-scale, scale, (n, n))
    w = np.triu(a, 1)
    return w + w.T


def w12(value):
    return WeightMatrix([[0.0, value], [value, 0.0]])


def point_mass(n, state):
    q = np.zeros(1 << n)
    q[state] = 1.0
    return q


def test_weight_matrix_validation():
    with pytest.raises(ValueError):
        WeightMatrix([[0, 1], [2, 0]])
    with pytest.raises(ValueError):
        WeightMatrix([[1, 0], [0, 0]])
    with pytest.raises(ValueError):
        WeightMatrix([[0, 1, 2], [1, 0, 3]])
    with pytest.raises(ValueError):
        WeightMatrix(np.zeros((2, 2)), bias=[1, 2, 3])


def test_stationary_examples():
    np.testing.assert_allclose(bm.stationary_distribution(WeightMatrix.zeros(2)), 0.25, atol=1e-15)
    np.testing.assert_allclose(bm.stationary_distribution(w12(LOG2)), [0.2, 0.2, 0.2, 0.4], atol=1e-15)
    np.testing.assert_allclose(bm.stationary_distribution(WeightMatrix.zeros(3)), 1 / 8, atol=1e-15)


def test_pair_expectation_examples():
    m = bm.pair_expectations(np.full(4, 0.25), 2)
    np.testing.assert_allclose(m, [[0.5, 0.25], [0.25, 0.5]], atol=1e-15)
    np.testing.assert_allclose(bm.pair_expectations(point_mass(3, 7), 3), 1.0)
    m = bm.pair_expectations(bm.stationary_distribution(w12(LOG2)), 2)
    assert m[0, 1] == pytest.approx(0.4, abs=1e-15)


def test_ahs_update_examples():
    W = w12(0.3)
    np.testing.assert_array_equal(bm.ahs_update(W, bm.stationary_distribution(W), 0.7), 0.0)
    d = bm.ahs_update(WeightMatrix.zeros(2), point_mass(2, 3), 0.1)
    assert d[0, 1] == pytest.approx(0.075, abs=1e-15) and d[0, 0] == 0
    d = bm.ahs_update(WeightMatrix.zeros(2), bm.stationary_distribution(w12(LOG2)), 1.0)
    assert d[0, 1] == pytest.approx(0.15, abs=1e-15)


def test_ahs_rejects_nonpositive_rate():
    for c in (0.0, -1.0):
        with pytest.raises(ValueError):
            bm.ahs_update(WeightMatrix.zeros(2), np.full(4, 0.25), c)


def test_kullback_examples():
    p = np.array([0.4, 0.2, 0.2, 0.2])
    assert bm.kullback(p, p) == 0.0
    hand = sum(0.25 * math.log(0.25 / v) for v in p)
    assert bm.kullback(np.full(4, 0.25), p) == pytest.approx(hand, abs=1e-15)
    for n in (1, 2, 3):
        assert bm.kullback(point_mass(n, 1), np.full(1 << n, 1 / (1 << n))) == pytest.approx(n * LOG2, abs=1e-14)


def test_kullback_support_error():
    with pytest.raises(bm.SupportError):
        bm.kullback([0.5, 0.5], [1.0, 0.0])


def test_kl_gradient_examples():
    W = w12(-0.4)
    np.testing.assert_array_equal(bm.kl_gradient(W, bm.stationary_distribution(W)), 0.0)
    g = bm.kl_gradient(WeightMatrix.zeros(2), point_mass(2, 3))
    assert g[0, 1] == pytest.approx(-0.75, abs=1e-15)


def test_distribution_validation():
    for q in ([0.5, 0.5, 0.1], [0.6, 0.6], [1.5, -0.5], [0.2, 0.2, 0.2, 0.2]):
        with pytest.raises(ValueError):
            bm.check_distribution(q)
    with pytest.raises(ValueError):
        bm.check_distribution(np.full(4, 0.25), n=3)


def test_train_from_fixed_point_takes_no_steps():
    W = w12(0.8)
    tr = bm.train(W, bm.stationary_distribution(W), 0.5)
    assert tr.iterations == 0 and tr.converged


def test_train_recovers_log2():
    q = bm.stationary_distribution(w12(LOG2))
    tr = bm.train(WeightMatrix.zeros(2), q, 1.0, tol=1e-8)
    oracle = ef.to_theta(ef.StateSpace.pairwise(2), [0.4]).coords[0]
    assert tr.converged
    assert tr.final.matrix[0, 1] == pytest.approx(oracle, abs=1e-6)
    assert tr.final.matrix[0, 1] == pytest.approx(LOG2, abs=1e-6)


def test_train_n4_random_target():
    rng = np.random.default_rng(11)
    q = bm.stationary_distribution(WeightMatrix(sym(4, rng)))
    tr = bm.train(WeightMatrix.zeros(4), q, 0.5)
    assert tr.converged and tr.moment_gap[-1] < 1e-8
    assert np.all(np.diff(tr.kl[1:]) <= 1e-15)


def test_train_with_biases_matches_ising_fit():
    rng = np.random.default_rng(5)
    target = WeightMatrix(sym(3, rng), bias=rng.uniform(-1, 1, 3))
    q = bm.stationary_distribution(target)
    tr = bm.train(WeightMatrix.zeros(3, biases=True), q, 0.5)
    np.testing.assert_allclose(tr.final.to_theta(), target.to_theta(), atol=1e-6)


def test_natural_gradient_converges_fast():
    rng = np.random.default_rng(2)
    q = bm.stationary_distribution(WeightMatrix(sym(3, rng)))
    tr = bm.train(WeightMatrix.zeros(3), q, 1.0, natural=True)
    assert tr.converged and tr.iterations < 15


def test_divergence_aborts_with_trace():
    q = np.array([0.5, 0.0, 0.0, 0.5])
    with pytest.raises(bm.DivergenceError) as info:
        bm.train(WeightMatrix.zeros(2), q, 1e5)
    assert info.value.trace is not None and len(info.value.trace.records) >= 1


def test_nonconvergence_is_logged(caplog):
    q = bm.stationary_distribution(w12(2.0))
    tr = bm.train(WeightMatrix.zeros(2), q, 0.1, max_iters=3)
    assert not tr.converged and tr.iterations == 3
    assert "stopped after" in caplog.text


def test_trace_csv_layout():
    q = bm.stationary_distribution(WeightMatrix([[0, 1, 0], [1, 0, 0], [0, 0, 0]]))
    tr = bm.train(WeightMatrix.zeros(3), q, 0.5)
    assert tr.csv_header() == ["iter", "kl", "moment_gap", "w_1_2", "w_1_3", "w_2_3"]
    rows = list(tr.csv_rows())
    assert [r[0] for r in rows] == list(range(len(rows)))
    with pytest.raises(ValueError):
        tr.append(tr.records[0])


def test_commutator_examples():
    pair = bm.commutator_decomposition(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_array_equal(pair.X, np.diag([0.0, 1.0]))
    np.testing.assert_array_equal(pair.Y, [[0.0, -1.0], [1.0, 0.0]])
    pair = bm.commutator_decomposition(np.zeros((4, 4)))
    np.testing.assert_array_equal(pair.X, np.diag([0.0, 1, 2, 3]))
    np.testing.assert_array_equal(pair.Y, 0.0)
    with pytest.raises(ValueError):
        bm.commutator_decomposition(np.eye(2))


def test_stationary_matches_exp_family():
    rng = np.random.default_rng(4)
    for n in (2, 3, 5):
        W = WeightMatrix(sym(n, rng, 2.0))
        p = bm.stationary_distribution(W)
        np.testing.assert_allclose(p, ef.densities(W.space(), W.to_theta()), rtol=0, atol=1e-14)


@st.composite
def weights_and_target(draw, max_n=5):
    n = draw(st.integers(2, max_n))
    m = n * (n - 1) // 2
    vals = draw(st.lists(st.floats(-2, 2), min_size=m, max_size=m))
    raw = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=1 << n, max_size=1 << n)))
    q = raw / raw.sum()
    q /= math.fsum(q)
    return WeightMatrix.from_theta(n, vals), q


@given(weights_and_target(), st.floats(0.01, 5.0))
def test_update_is_negative_scaled_gradient(data, c):
    W, q = data
    np.testing.assert_array_equal(bm.ahs_update(W, q, c), -c * bm.kl_gradient(W, q))


@given(weights_and_target(max_n=4))
def test_gradient_matches_finite_differences(data):
    W, q = data
    g = bm.kl_gradient(W, q)
    h = 1e-5
    for i in range(W.n):
        for j in range(i + 1, W.n):
            e = np.zeros((W.n, W.n))
            e[i, j] = e[j, i] = h
            fd = (bm.kullback(q, bm.stationary_distribution(WeightMatrix(W.matrix + e)))
                  - bm.kullback(q, bm.stationary_distribution(WeightMatrix(W.matrix - e)))) / (2 * h)
            assert g[i, j] == pytest.approx(fd, abs=1e-6)


@given(weights_and_target())
def test_kullback_nonnegative(data):
    W, q = data
    p = bm.stationary_distribution(W)
    assert bm.kullback(q, p) >= 0
    assert bm.kullback(p, p) == 0


@given(weights_and_target(max_n=4))
def test_fixed_points_are_moment_matches(data):
    W, _ = data
    p = bm.stationary_distribution(W)
    assert np.max(np.abs(bm.ahs_update(W, p, 1.0))) < 1e-15


@given(st.integers(2, 8), st.integers(0, 2 ** 32 - 1))
def test_commutator_reconstruction(n, seed):
    W = sym(n, np.random.default_rng(seed), 10.0)
    pair = bm.commutator_decomposition(W)
    assert np.max(np.abs(pair.commutator() - W)) < 1e-12
    assert np.all(np.isfinite(pair.Y))


@given(weights_and_target(max_n=3))
def test_kl_monotone_below_inverse_fisher_bound(data):
    target, _ = data
    q = bm.stationary_distribution(target)
    W = WeightMatrix.zeros(target.n)
    # the step bound 1/lambda_max holds uniformly since lambda_max <= dim/4
    c = 4.0 / W.space().dim
    tr = bm.train(W, q, min(c, 1.0), max_iters=400, tol=1e-9)
    assert np.all(np.diff(tr.kl) <= 1e-15)
