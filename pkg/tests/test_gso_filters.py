import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cycle_weights, path_weights, random_weights
from dmgso import errors
from dmgso.diffusion_map import decompose, markov_matrix, stationary_distribution
from dmgso.graph_core import build_graph, random_sensor_graph
from dmgso.gso_filters import (
    ADJACENCY,
    DIFFUSION_MAP,
    IDENTITY_MINUS_POWER,
    LAPLACIAN,
    MARKOV,
    TRUNCATED,
    FilterSpec,
    FourierBasis,
    ShiftOperator,
    apply_filter,
    build_gso,
    check_gso_properties,
    gft,
    igft,
    polynomial_apply,
    spectral_convolve,
)


@pytest.fixture
def graph(rng):
    return build_graph(random_weights(12, rng))


def test_adjacency_passthrough(graph):
    S = build_gso(graph, ADJACENCY)
    assert np.array_equal(S.matrix, graph.weights)
    assert np.all(np.diff(S.basis.eigenvalues) <= 0)


def test_laplacian_ascending(graph):
    S = build_gso(graph, "L")
    assert np.all(np.diff(S.basis.eigenvalues) >= 0)
    assert S.basis.eigenvalues[0] == pytest.approx(0.0, abs=1e-12)


def test_truncated_full_rank_is_p_minus_stationary(graph):
    S = build_gso(graph, DIFFUSION_MAP, t=1, l=graph.n - 1, mode=TRUNCATED)
    tm = markov_matrix(graph.weights)
    # oracle from the definition, no eigenvectors involved
    pi = graph.degrees / graph.degrees.sum()
    assert np.max(np.abs(S.matrix - (tm.p - np.outer(np.ones(graph.n), pi)))) <= 1e-8


def test_identity_minus_power_exact(graph):
    S = build_gso(graph, DIFFUSION_MAP, t=1, mode=IDENTITY_MINUS_POWER)
    assert np.array_equal(S.matrix, np.eye(graph.n) - markov_matrix(graph.weights).p)
    S3 = build_gso(graph, DIFFUSION_MAP, t=3, mode=IDENTITY_MINUS_POWER)
    p = markov_matrix(graph.weights).p
    assert np.allclose(S3.matrix, np.eye(graph.n) - p @ p @ p, atol=1e-14)


def test_build_gso_errors(graph):
    with pytest.raises(errors.BadTruncation):
        build_gso(graph, DIFFUSION_MAP, l=graph.n)
    with pytest.raises(errors.BadParams):
        build_gso(graph, DIFFUSION_MAP, t=-1)
    with pytest.raises(errors.BadParams):
        build_gso(graph, "Q")
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 0] = 1.0
    with pytest.raises(errors.IsolatedNode):
        build_gso(build_graph(w), MARKOV)


def test_truncation_nesting(rng):
    g = build_graph(random_weights(15, rng))
    dec = decompose(markov_matrix(g.weights))
    s5 = build_gso(g, DIFFUSION_MAP, t=2, l=5).matrix
    s9 = build_gso(g, DIFFUSION_MAP, t=2, l=9).matrix
    lam, psi, phi = dec.eigenvalues, dec.right_vectors, dec.left_vectors
    extra = (psi[:, 6:10] * lam[6:10] ** 2) @ phi[:, 6:10].T
    assert np.allclose(s9 - s5, extra, atol=1e-12)


def test_gft_constant_signal_laplacian(graph):
    S = build_gso(graph, LAPLACIAN)
    x_hat = gft(S.basis, np.ones(graph.n))
    assert np.all(np.abs(x_hat[1:]) <= 1e-10)


@pytest.mark.parametrize("kind", ["A", "L", "P", "DM"])
def test_gft_round_trip(kind, rng):
    g = build_graph(random_weights(20, rng))
    S = build_gso(g, kind)
    x = rng.normal(size=(20, 50))
    assert np.max(np.abs(igft(S.basis, gft(S.basis, x)) - x)) <= 1e-10
    if S.basis.orthonormal:
        assert np.allclose(np.linalg.norm(gft(S.basis, x), axis=0), np.linalg.norm(x, axis=0), atol=1e-10)
    else:
        # Parseval holds in the degree-weighted inner product
        ratio = np.sum(gft(S.basis, x) ** 2, axis=0) / S.basis.energy(x)
        assert np.allclose(ratio, 1.0, atol=1e-10)


def test_igft_basis_columns(graph):
    S = build_gso(graph, LAPLACIAN)
    assert np.array_equal(igft(S.basis, np.zeros(graph.n)), np.zeros(graph.n))
    e = np.zeros(graph.n)
    e[3] = 1.0
    assert np.allclose(igft(S.basis, e), S.basis.vectors[:, 3])


def test_filter_identity_cases(graph, rng):
    x = rng.normal(size=graph.n)
    for kind in ("A", "L", "P", "DM"):
        S = build_gso(graph, kind)
        assert np.allclose(apply_filter(S, FilterSpec.identity(), x), x, atol=1e-10)
        assert np.allclose(apply_filter(S, FilterSpec.tikhonov(0.0), x), x, atol=1e-10)


def test_heat_on_constant(graph):
    S = build_gso(graph, LAPLACIAN)
    y = apply_filter(S, FilterSpec("heat", t=2.0), np.ones(graph.n))
    assert np.allclose(y, 1.0, atol=1e-10)


def test_tikhonov_pole():
    g = build_graph(path_weights(4))
    S = build_gso(g, MARKOV)
    with pytest.raises(errors.FilterPole):
        apply_filter(S, FilterSpec.tikhonov(1.0, -1), np.ones(4))


def test_filter_spec_validation():
    with pytest.raises(errors.BadParams):
        FilterSpec.tikhonov(1.5)
    with pytest.raises(errors.BadParams):
        FilterSpec("heat", t=-1)
    with pytest.raises(errors.BadParams):
        FilterSpec("polynomial", coeffs=(np.inf,))
    with pytest.raises(errors.BadParams):
        FilterSpec("wavelet")


def test_tikhonov_response_values():
    lam = np.array([0.0, 1.0, 2.0])
    assert np.allclose(FilterSpec.tikhonov(0.5).response(lam), [1.0, 1 / 1.5, 0.5])
    assert np.allclose(FilterSpec.tikhonov(0.5, -1).response(np.array([0.5])), [1 / 0.75])


def test_polynomial_apply_examples(rng):
    g = build_graph(path_weights(3))
    S = build_gso(g, LAPLACIAN)
    x = rng.normal(size=3)
    assert np.allclose(polynomial_apply(S, [0, 1], x), S.matrix @ x)
    assert np.allclose(polynomial_apply(S, [1, 0, 0], x), x)
    spectral = apply_filter(S, FilterSpec("polynomial", coeffs=(0, 0, 1)), x)
    assert np.max(np.abs(polynomial_apply(S, [0, 0, 1], x) - spectral)) <= 1e-10


@pytest.mark.parametrize("kind", ["A", "L", "P", "DM"])
def test_polynomial_agrees_with_spectral(kind, rng):
    g = build_graph(random_weights(10, rng))
    S = build_gso(g, kind)
    coeffs = (0.3, -0.2, 0.1, 0.05)
    x = rng.normal(size=10)
    spectral = apply_filter(S, FilterSpec("polynomial", coeffs=coeffs), x)
    assert np.max(np.abs(polynomial_apply(S, coeffs, x) - spectral)) <= 1e-8


def test_spectral_convolve_identity_and_commutativity(graph, rng):
    S = build_gso(graph, LAPLACIAN)
    f = rng.normal(size=graph.n)
    g = rng.normal(size=graph.n)
    delta_like = igft(S.basis, np.ones(graph.n))
    assert np.allclose(spectral_convolve(S.basis, f, delta_like), f, atol=1e-10)
    assert np.max(np.abs(spectral_convolve(S.basis, f, g) - spectral_convolve(S.basis, g, f))) <= 1e-12


def test_spectral_convolve_cycle_direct_sum(rng):
    S = build_gso(build_graph(cycle_weights(4)), LAPLACIAN)
    u = S.basis.vectors
    f, g = rng.normal(size=4), rng.normal(size=4)
    fh, gh = u.T @ f, u.T @ g
    ref = np.array([sum(fh[k] * gh[k] * u[i, k] for k in range(4)) for i in range(4)])
    assert np.max(np.abs(spectral_convolve(S.basis, f, g) - ref)) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["A", "L", "P", "DM"]), st.floats(0.0, 1.0))
def test_filter_commutes_with_shift(seed, kind, tau):
    rng = np.random.default_rng(seed)
    g = build_graph(random_weights(9, rng))
    S = build_gso(g, kind)
    f = FilterSpec("heat", t=tau)
    x = rng.normal(size=9)
    lhs = apply_filter(S, f, S.matrix @ x)
    rhs = S.matrix @ apply_filter(S, f, x)
    assert np.max(np.abs(lhs - rhs)) <= 1e-8 * max(1.0, np.abs(S.matrix).max())


def test_property_report_laplacian(graph):
    rep = check_gso_properties(build_gso(graph, LAPLACIAN))
    assert rep.linearity_residual <= 1e-12
    assert rep.convolutive_residual <= 1e-8
    assert rep.norm_bounded


def test_markov_regular_norm_one():
    S = build_gso(build_graph(cycle_weights(7)), MARKOV)
    # power-method oracle on P^T P
    m = S.matrix
    v = np.random.default_rng(1).normal(size=7)
    for _ in range(2000):
        v = m.T @ (m @ v)
        v /= np.linalg.norm(v)
    assert np.sqrt(v @ m.T @ m @ v) == pytest.approx(1.0, abs=1e-8)
    assert check_gso_properties(S).spectral_norm == pytest.approx(1.0, abs=1e-8)


def test_negative_control_not_convolutive(graph, rng):
    S = build_gso(graph, LAPLACIAN)
    bogus = ShiftOperator("bogus", rng.normal(size=(graph.n, graph.n)), S.basis, 1e9)
    assert check_gso_properties(bogus).convolutive_residual > 0.01


@pytest.mark.parametrize("mode, t", [(TRUNCATED, 1), (TRUNCATED, 3), (IDENTITY_MINUS_POWER, 2)])
def test_diffusion_map_non_expansive(mode, t):
    g = random_sensor_graph(25, 4)
    rep = check_gso_properties(build_gso(g, DIFFUSION_MAP, t=t, mode=mode))
    assert rep.non_expansive
    assert rep.linear and rep.convolutive and rep.norm_bounded


def test_identity_minus_p_expands():
    # trace(P) = 0 forces a negative eigenvalue, so I - P has one above 1
    g = random_sensor_graph(25, 4)
    S = build_gso(g, DIFFUSION_MAP, t=1, mode=IDENTITY_MINUS_POWER)
    assert S.basis.eigenvalues.max() > 1.0
    assert not check_gso_properties(S).non_expansive


def test_stationary_row_of_truncated(graph):
    # the truncated operator annihilates constants and pi^T
    S = build_gso(graph, DIFFUSION_MAP, t=2, l=5)
    pi = stationary_distribution(decompose(markov_matrix(graph.weights)))
    assert np.max(np.abs(S.matrix @ np.ones(graph.n))) <= 1e-12
    assert np.max(np.abs(pi @ S.matrix)) <= 1e-12


def test_report_csv(graph, tmp_path):
    rep = check_gso_properties(build_gso(graph, MARKOV), n_probes=50)
    text = rep.csv_text()
    lines = text.splitlines()
    assert lines[0] == "property,residual,pass"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["linearity", "convolutive", "norm_bound", "non_expansive"]
    assert rep.to_csv(tmp_path / "r.csv").read_text() == text


def test_basis_inverse_identity(graph):
    for kind in ("A", "L", "P", "DM"):
        b = build_gso(graph, kind).basis
        assert isinstance(b, FourierBasis)
        assert np.max(np.abs(b.vectors @ b.inverse - np.eye(graph.n))) <= 1e-8
