import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from conftest import path_weights, random_weights
from dmgso import errors
from dmgso.diffusion_map import decompose, markov_matrix
from dmgso.graph_core import build_graph, laplacian, random_sensor_graph
from dmgso.variation import (
    edge_sum_variation,
    leading_projection,
    markov_variation,
    markov_variation_expanded,
    smoothness_constant,
    smoothness_test,
    total_variation,
    tv_mv_gap_diagnostic,
    variation_report,
)

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_tv_examples():
    lap = laplacian(build_graph(SWAP))
    x = np.array([1.0, -1.0])
    assert total_variation(lap, x) == 4.0
    assert edge_sum_variation(SWAP, x) == 4.0
    assert total_variation(lap, np.ones(2)) == pytest.approx(0.0, abs=1e-12)


def test_rayleigh_at_eigenvectors(rng):
    lap = laplacian(build_graph(random_weights(15, rng)))
    lam, u = np.linalg.eigh(lap)
    for k in range(15):
        assert total_variation(lap, u[:, k]) == pytest.approx(lam[k], abs=1e-8)


def test_mv_examples():
    tm = markov_matrix(SWAP)
    assert markov_variation(tm, np.array([1.0, -1.0]), "l1") == 4.0
    assert markov_variation(tm, np.ones(2)) == 0.0
    assert markov_variation(tm, np.array([1.0, -1.0]), "l2") == pytest.approx(np.sqrt(8.0))
    with pytest.raises(errors.BadParams):
        markov_variation(tm, np.ones(2), "linf")


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**31 - 1))
def test_mv_matrix_vs_expansion(n, seed):
    rng = np.random.default_rng(seed)
    w = random_weights(n, rng)
    x = rng.normal(size=n)
    a = markov_variation(markov_matrix(w), x, "l1")
    b = markov_variation_expanded(w, x)
    assert abs(a - b) <= 1e-12 * max(1.0, a)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 20), st.integers(0, 2**31 - 1), st.floats(-5, 5))
def test_tv_mv_properties(n, seed, alpha):
    rng = np.random.default_rng(seed)
    w = random_weights(n, rng)
    lap = laplacian(build_graph(w))
    tm = markov_matrix(w)
    x = rng.normal(size=n)
    tv = total_variation(lap, x)
    assert tv >= -1e-12
    assert tv == pytest.approx(edge_sum_variation(w, x), abs=1e-10 * max(1, tv))
    assert total_variation(lap, alpha * x) == pytest.approx(alpha**2 * tv, abs=1e-10 * max(1, tv * alpha**2))
    mv = markov_variation(tm, x)
    assert markov_variation(tm, alpha * x) == pytest.approx(abs(alpha) * mv, abs=1e-10 * max(1, mv))


def test_tv_zero_iff_constant_per_component():
    w = np.zeros((5, 5))
    w[0, 1] = w[1, 0] = 1.0
    w[2, 3] = w[3, 2] = w[3, 4] = w[4, 3] = 2.0
    lap = laplacian(build_graph(w))
    assert total_variation(lap, np.array([3.0, 3.0, -1.0, -1.0, -1.0])) == pytest.approx(0.0, abs=1e-12)
    assert total_variation(lap, np.array([3.0, 3.0, -1.0, -1.0, 0.0])) > 1e-3


def test_mv_null_space_is_constants(rng):
    for n in (5, 12, 20):
        w = random_weights(n, rng)
        ns = null_space(np.eye(n) - markov_matrix(w).p, rcond=1e-10)
        assert ns.shape[1] == 1
        v = ns[:, 0] / ns[0, 0]
        assert np.allclose(v, 1.0, atol=1e-10)


def test_smoothness_test_cases():
    tm = markov_matrix(SWAP)
    assert smoothness_test(tm, np.ones(2), 1e-6)
    assert not smoothness_test(tm, np.array([1.0, -1.0]), 1.0)
    with pytest.raises(errors.BadParams):
        smoothness_test(tm, np.ones(2), 0.0)


def test_smoothness_path_eigenvector():
    n = 10
    w = path_weights(n)
    lam, u = np.linalg.eigh(laplacian(build_graph(w)))
    x = u[:, 1]
    threshold = 2 * lam[1] * n
    # direct evaluation of the decision
    p = w / w.sum(1)[:, None]
    expected = np.sum(np.abs(x - p @ x)) < threshold
    assert smoothness_test(markov_matrix(w), x, threshold) == expected


def test_smoothness_constant(rng):
    w = random_weights(6, rng)
    lap = laplacian(build_graph(w))
    x = rng.normal(size=6)
    assert smoothness_constant(lap, x) == pytest.approx(np.max(np.abs(lap @ x)))


def test_gap_diagnostic_fixed_point():
    g = random_sensor_graph(20, 3)
    dec = decompose(markov_matrix(g.weights))
    lap = laplacian(g)
    x = dec.right_vectors[:, 1]
    rep = tv_mv_gap_diagnostic(dec, lap, markov_matrix(g.weights), x)
    assert rep.residual_norm == pytest.approx(0.0, abs=1e-12)
    assert rep.bound == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(leading_projection(dec, x), x)
    assert rep.gap >= 0


def test_gap_diagnostic_constant():
    g = random_sensor_graph(20, 3)
    dec = decompose(markov_matrix(g.weights))
    rep = tv_mv_gap_diagnostic(dec, laplacian(g), markov_matrix(g.weights), np.ones(20))
    assert rep.tv == pytest.approx(0.0, abs=1e-12)
    assert rep.mv_l1 == pytest.approx(0.0, abs=1e-12)
    assert rep.holds


def test_gap_diagnostic_requires_connected():
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = w[2, 3] = w[3, 2] = 1.0
    # decompose works on disconnected graphs; the diagnostic refuses them
    dec = decompose(markov_matrix(w))
    with pytest.raises(errors.NotConnected):
        tv_mv_gap_diagnostic(dec, laplacian(build_graph(w)), markov_matrix(w), np.arange(4.0))


def test_gap_diagnostic_records_both_sides():
    g = random_sensor_graph(20, 5)
    dec = decompose(markov_matrix(g.weights))
    x = np.sin(3 * g.coords[:, 0]) + np.cos(2 * g.coords[:, 1])
    rep = tv_mv_gap_diagnostic(dec, laplacian(g), markov_matrix(g.weights), x)
    assert rep.gap == pytest.approx(abs(rep.tv - rep.mv_l1))
    assert rep.bound >= 0 and rep.holds in (True, False)


def test_variation_report(rng):
    w = random_weights(7, rng)
    x = rng.normal(size=7)
    rep = variation_report(w, x)
    assert rep.tv == pytest.approx(total_variation(laplacian(build_graph(w)), x))
    assert rep.holds is None
