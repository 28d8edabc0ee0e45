import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nnkgraph.dataset import PointSet
from nnkgraph.graph import (
    LocalFit,
    build,
    build_knn,
    build_lle_positive,
    build_nnk,
    build_nnk_greedy,
    edge_density,
    greedy_local_fit,
    lle_weights,
    load_graph,
    save_graph,
    symmetrize,
)
from nnkgraph.kernel import KernelSpec, bandwidth_from_neighbors
from nnkgraph.neighbors import InvalidK

from oracles import gaussian_dense, nnk_graph_oracle, random_cloud, simplex_lsq_oracle

G1 = KernelSpec.gaussian(1.0)


def test_two_points_single_edge():
    ps = PointSet(np.array([[0.0, 0.0], [1.0, 0.0]]))
    g = build_nnk(ps, 1, G1)
    assert g.n_edges == 1
    assert g.weights[0] == pytest.approx(math.exp(-0.5), rel=1e-12)


def test_chain_graph():
    ps = PointSet(np.arange(4.0)[:, None])
    g = build_nnk(ps, 3, G1)
    assert g.edge_set() == {(0, 1), (1, 2), (2, 3)}
    np.testing.assert_allclose(g.weights, 0.53423043, atol=1e-8)
    assert edge_density(g) == pytest.approx(0.75)


@pytest.mark.parametrize("seed,d", [(0, 2), (1, 3), (2, 5)])
def test_nnk_matches_dense_oracle(seed, d):
    X = np.random.default_rng(seed).standard_normal((40, d))
    ps = PointSet(X)
    s2 = bandwidth_from_neighbors(ps, 6)
    g = build_nnk(ps, 6, KernelSpec.gaussian(s2))
    np.testing.assert_allclose(g.dense(), nnk_graph_oracle(X, 6, s2), atol=1e-7)


def _fit(i, cand, supp, w, J):
    return LocalFit(i, np.array(cand), np.array(supp), np.array(w, float), J)


def test_symmetrize_smaller_error_wins():
    # both nodes list each other; node 1 has the smaller error and pruned 0
    fits = [_fit(0, [1], [1], [0.4], 0.3), _fit(1, [0], [], [], 0.1)]
    assert symmetrize(fits, 2, "t").n_edges == 0
    fits = [_fit(0, [1], [1], [0.4], 0.1), _fit(1, [0], [], [], 0.3)]
    g = symmetrize(fits, 2, "t")
    assert g.edge_set() == {(0, 1)} and g.weights[0] == 0.4 and g.source[0] == 0


def test_symmetrize_error_tie_goes_to_lower_index():
    fits = [_fit(0, [1], [1], [0.4], 0.2), _fit(1, [0], [0], [0.6], 0.2)]
    assert symmetrize(fits, 2, "t").weights[0] == 0.4


def test_symmetrize_one_sided_keeps_proposer():
    fits = [_fit(0, [2], [2], [0.7], 0.2), _fit(1, [2], [2], [0.1], 0.0),
            _fit(2, [1], [1], [0.5], 0.4)]
    g = symmetrize(fits, 3, "t")
    assert dict(zip(g.edge_set(), g.weights)) == {(0, 2): 0.7, (1, 2): 0.1}


def test_symmetrize_union():
    fits = [_fit(0, [1], [1], [0.4], 0.0), _fit(1, [0, 2], [0, 2], [0.4, 0.2], 0.0),
            _fit(2, [0], [0], [0.3], 0.0)]
    g = symmetrize(fits, 3, "knn", mode="union")
    assert g.edge_set() == {(0, 1), (1, 2), (0, 2)}


def test_nnk_properties_random(rng):
    ps = random_cloud(rng, n=120, d=3)
    K = 10
    spec = KernelSpec.gaussian(bandwidth_from_neighbors(ps, K))
    nnk, knn = build_nnk(ps, K, spec), build_knn(ps, K, spec)
    assert nnk.edge_set() <= knn.edge_set()
    assert all(len(f.support) <= K for f in nnk.fits)
    assert np.all(nnk.weights > 0)
    assert np.all(knn.degrees() >= K)
    assert edge_density(nnk) <= edge_density(knn)


def test_knn_equidistant_and_weights():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    g = build_knn(PointSet(X), 1, G1)
    # one mutual pair plus one one-sided pick, whichever way rounding breaks the ties
    assert g.n_edges == 2
    np.testing.assert_allclose(g.weights, math.exp(-0.5), rtol=1e-12)


def test_knn_weights_are_kernel_values(rng):
    ps = random_cloud(rng, n=50, d=2)
    g = build_knn(ps, 4, G1)
    Kd = gaussian_dense(ps.points, 1.0)
    np.testing.assert_allclose(g.weights, Kd[g.rows, g.cols], rtol=1e-12)


def test_greedy_single_atom():
    ps = PointSet(np.array([[0.0], [1.0]]))
    for mode in ("mp", "omp"):
        fit = greedy_local_fit(ps, 0, [1], G1, mode)
        assert fit.weights[0] == pytest.approx(math.exp(-0.5))


def test_error_ordering_across_builders(rng):
    ps = random_cloud(rng, n=150, d=2)
    K = 12
    spec = KernelSpec.gaussian(bandwidth_from_neighbors(ps, K))
    nnk = build_nnk(ps, K, spec)
    omp = build_nnk_greedy(ps, K, spec, "omp")
    mp = build_nnk_greedy(ps, K, spec, "mp")
    knn = build_knn(ps, K, spec)
    for a, b, c, d in zip(nnk.fits, omp.fits, mp.fits, knn.fits):
        assert a.objective <= b.objective + 1e-10
        assert b.objective <= 0.5 + 1e-12
        assert a.objective <= d.objective + 1e-10
        if np.array_equal(np.sort(b.candidates), np.sort(c.candidates)):
            assert b.objective <= c.objective + 1e-10


def test_lle_midpoint_and_affine():
    nb = np.array([[0.0, 0.0], [1.0, 0.0]])
    theta, r = lle_weights(np.array([0.5, 0.0]), nb)
    np.testing.assert_allclose(theta, [0.5, 0.5], atol=1e-12)
    assert r == pytest.approx(0.0, abs=1e-20)
    theta, _ = lle_weights(np.array([0.3, 0.0]), nb)
    np.testing.assert_allclose(theta, [0.7, 0.3], atol=1e-12)
    # off the segment: the closest hull point is the projection
    theta, r = lle_weights(np.array([0.3, 0.4]), nb)
    np.testing.assert_allclose(theta, [0.7, 0.3], atol=1e-12)
    assert r == pytest.approx(0.16)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 6), st.integers(2, 5))
def test_lle_matches_projected_gradient(seed, m, d):
    # weights are unique only for affinely independent neighbors (m <= d + 1)
    m = min(m, d + 1)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(d)
    nb = rng.standard_normal((m, d))
    theta, r = lle_weights(x, nb)
    ref = simplex_lsq_oracle(x, nb)
    r_ref = float(np.sum((x - ref @ nb) ** 2))
    assert abs(theta.sum() - 1) < 1e-12 and np.all(theta >= 0)
    assert r <= r_ref + 1e-9
    np.testing.assert_allclose(theta, ref, atol=1e-5)


def test_lle_nonneg_variant():
    theta, r = lle_weights(np.array([2.0, 0.0]), np.array([[1.0, 0.0], [0.0, 1.0]]), "nonneg")
    np.testing.assert_allclose(theta, [2.0, 0.0], atol=1e-12)
    assert r == pytest.approx(0.0, abs=1e-20)


def test_lle_graph_drops_duplicates():
    X = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    with pytest.warns(UserWarning):
        g = build_lle_positive(PointSet(X), 2)
    assert g.n == 5


def test_edge_density_empty():
    fits = [_fit(i, [], [], [], 0.5) for i in range(3)]
    assert edge_density(symmetrize(fits, 3, "t")) == 0.0


def test_save_load_round_trip(tmp_path, rng):
    ps = random_cloud(rng, n=30)
    g = build_nnk(ps, 5, G1)
    save_graph(g, tmp_path / "g.csv")
    back = load_graph(tmp_path / "g.csv")
    assert back.n == g.n and back.builder_tag == "nnk"
    assert back.meta["K"] == 5 and back.meta["kernel"] == {"kind": "gaussian", "sigma_sq": 1.0}
    np.testing.assert_array_equal(back.rows, g.rows)
    np.testing.assert_allclose(back.weights, g.weights, rtol=1e-11)


@pytest.mark.parametrize("method", ["nnk", "nnk_mp", "nnk_omp", "knn", "lle_pos"])
def test_deterministic_and_thread_invariant(rng, method):
    ps = random_cloud(rng, n=80, d=3)
    a = build(ps, method, 7, G1)
    b = build(ps, method, 7, G1, workers=4)
    assert a.rows.tobytes() == b.rows.tobytes()
    assert a.weights.tobytes() == b.weights.tobytes()


def test_invalid_k_and_method(rng):
    ps = random_cloud(rng, n=5)
    with pytest.raises(InvalidK):
        build_nnk(ps, 5, G1)
    with pytest.raises(ValueError):
        build(ps, "nope", 2, G1)


def test_cosine_kernel_graph(rng):
    ps = random_cloud(rng, n=40, d=2)
    g = build_nnk(ps, 6, KernelSpec.cosine_at_node())
    assert g.n_edges > 0 and np.all(g.weights > 0)
