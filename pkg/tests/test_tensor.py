import math

import numpy as np
import pytest

from artifact.errors import (
    BoundaryProximityError,
    IllConditionedPairError,
    NonTameError,
    UnsupportedOrderError,
    ValidationError,
)
from artifact.tensor import (
    ChartManifold,
    MetricPair,
    TensorField,
    catalog_pairs,
    christoffel,
    christoffel_batch,
    connection_difference,
    connection_difference_field,
    curvature_difference,
    curvature_difference_batch,
    euclidean,
    fd_derivative,
    hyperbolic_plane,
    linear_frame_plane,
    metric_from_omega_J,
    polar_flat,
    riemann_batch,
    riemann_curvature,
    round_sphere,
    sampled_sup_norm,
    sectional_curvature,
    standard_J_matrix,
    standard_omega_matrix,
    tensor_norm,
    tensor_norm_parts,
)


def const(m):
    m = np.asarray(m, float)
    return lambda X: np.broadcast_to(m, np.asarray(X).shape[:-1] + m.shape).copy()


def test_fd_derivative_polynomial_exact():
    X = np.array([[0.3, -0.2]])
    d = fd_derivative(lambda Y: (Y[:, 0] ** 3 + Y[:, 0] * Y[:, 1])[:, None], X, 1e-2, order=4)
    assert d.shape == (1, 1, 2)
    assert np.allclose(d[0, 0], [3 * 0.09 - 0.2, 0.3], atol=1e-12)


def test_metric_from_omega_J_standard_is_identity():
    g = metric_from_omega_J(const(standard_omega_matrix(1)), const(standard_J_matrix(1)))
    X = np.random.default_rng(1).normal(size=(5, 2))
    assert np.allclose(g(X), np.eye(2), atol=1e-15)


def test_metric_from_omega_J_conjugated_brute_force():
    S = np.diag([2.0, 0.5])
    J = S @ standard_J_matrix(1) @ np.linalg.inv(S)
    W = standard_omega_matrix(1)
    g = metric_from_omega_J(const(W), const(J))
    X = np.random.default_rng(2).normal(size=(10, 2))
    G = g(X)
    e = np.eye(2)
    for n in range(10):
        for i in range(2):
            for j in range(2):
                ref = 0.5 * (e[i] @ W @ J @ e[j] + e[j] @ W @ J @ e[i])
                assert G[n, i, j] == pytest.approx(ref, abs=1e-15)
    # frozen oracle: hand evaluation of the symmetrised form gives diag(1/4, 4)
    assert np.allclose(G[0], np.diag([0.25, 4.0]), atol=1e-14)


def test_metric_from_omega_J_compatible_pair_is_J_invariant():
    g = metric_from_omega_J(const(standard_omega_matrix(2)), const(standard_J_matrix(2)))
    G = g(np.zeros((1, 4)))[0]
    J = standard_J_matrix(2)
    assert np.max(np.abs(J.T @ G @ J - G)) < 1e-12


def test_non_tame_rejected_with_location():
    with pytest.raises(NonTameError):
        metric_from_omega_J(const(standard_omega_matrix(1)), const(-standard_J_matrix(1)))(np.zeros((1, 2)))


def test_chart_validation_rejects_bad_J():
    with pytest.raises(ValidationError):
        ChartManifold(2, [(-1, 1), (-1, 1)], const(np.eye(2)), J_fn=const(np.eye(2)))


def test_christoffel_euclidean_zero():
    M = euclidean(3)
    assert np.max(np.abs(christoffel(M, [0.1, 0.2, 0.3]))) < 1e-12


def test_christoffel_sphere_equator():
    G = christoffel(round_sphere(1.0), [math.pi / 2, 0.0])
    assert abs(G[0, 1, 1]) < 1e-8          # -sin cos
    assert abs(G[1, 0, 1]) < 1e-8          # cot


def test_christoffel_polar_closed_form():
    G = christoffel(polar_flat(), [2.0, 0.3])
    assert G[0, 1, 1] == pytest.approx(-2.0, abs=1e-6)
    assert G[1, 0, 1] == pytest.approx(0.5, abs=1e-6)


def test_christoffel_boundary_proximity():
    M = euclidean(2, half_width=1.0)
    with pytest.raises(BoundaryProximityError):
        christoffel(M, [1.0 - 1e-6, 0.0])


def test_riemann_euclidean_zero():
    assert np.max(np.abs(riemann_curvature(euclidean(2), [0.2, 0.1]))) < 1e-8


def test_sphere_sectional_curvature_one():
    M = round_sphere(1.0)
    for p in M.sample_points(20, margin=0.1):
        assert sectional_curvature(M, p, [1, 0], [0, 1]) == pytest.approx(1.0, abs=1e-5)


def test_hyperbolic_sectional_curvature_minus_one():
    M = hyperbolic_plane()
    for p in M.sample_points(20, margin=0.2):
        assert sectional_curvature(M, p, [1, 0], [0, 1]) == pytest.approx(-1.0, abs=1e-5)


def test_tensor_norm_identity_endomorphism():
    M = euclidean(2)
    I = TensorField((1, 1), lambda X: np.broadcast_to(np.eye(2), (len(X), 2, 2)).copy(), 2)
    parts = tensor_norm_parts(M, I, [0.1, 0.1], 1)
    assert parts[0] == pytest.approx(math.sqrt(2), abs=1e-14)
    assert parts[1] < 1e-10


def test_tensor_norm_sphere_curvature_two():
    M = round_sphere(1.0)
    R = TensorField((3, 1), lambda X: riemann_batch(M, X), 2)
    assert tensor_norm(M, R, [1.0, 0.3], 0) == pytest.approx(2.0, abs=1e-4)


def test_tensor_norm_standard_J_parallel():
    M = euclidean(2)
    J = TensorField((1, 1), lambda X: np.broadcast_to(standard_J_matrix(1), (len(X), 2, 2)).copy(), 2)
    assert tensor_norm_parts(M, J, [0.0, 0.0], 1)[1] < 1e-8


def test_tensor_norm_rejects_order_three():
    M = euclidean(2)
    I = TensorField((1, 1), lambda X: np.broadcast_to(np.eye(2), (len(X), 2, 2)).copy(), 2)
    with pytest.raises(UnsupportedOrderError):
        tensor_norm(M, I, [0, 0], 3)


def test_sampled_sup_norm_reports_kind():
    M = round_sphere(1.0)
    R = TensorField((3, 1), lambda X: riemann_batch(M, X), 2)
    out = sampled_sup_norm(M, R, 0, n_samples=8)
    assert out["kind"] == "sampled sup" and out["samples"] == 8
    assert out["value"] == pytest.approx(2.0, abs=1e-4)


def _closed_form_conformal_gamma(x):
    # h = e^{2x}(dx^2 + dy^2): Gamma^x_xx = 1, Gamma^x_yy = -1, Gamma^y_xy = 1
    G = np.zeros((2, 2, 2))
    G[0, 0, 0] = 1.0
    G[0, 1, 1] = -1.0
    G[1, 0, 1] = G[1, 1, 0] = 1.0
    return G


def test_connection_difference_identity_pair_zero():
    M = euclidean(2)
    pair = MetricPair(M, M)
    assert np.max(np.abs(connection_difference(pair, [0.1, 0.2], [1, 0], [0.3, 1]))) < 1e-12


def test_connection_difference_conformal_closed_form():
    pair = catalog_pairs()["conformal"]
    for p in pair.g.sample_points(10, margin=0.1):
        Hf = connection_difference_field(pair)(p[None])[0]
        assert np.max(np.abs(Hf + _closed_form_conformal_gamma(p[0]))) < 1e-6


def test_connection_difference_stretched_matches_christoffel():
    pair = catalog_pairs()["stretched"]
    for p in pair.g.sample_points(10, margin=0.1):
        H = connection_difference_field(pair)(p[None])[0]
        ref = christoffel_batch(pair.g, p[None])[0] - christoffel_batch(pair.h, p[None])[0]
        assert np.max(np.abs(H - ref)) < 1e-6
        # closed form Gamma^x_xx = x / (1 + x^2)
        assert H[0, 0, 0] == pytest.approx(-p[0] / (1 + p[0] ** 2), abs=1e-6)


def test_ill_conditioned_pair():
    M = euclidean(2)
    h = ChartManifold(2, M.box, const(np.diag([1.0, 1e-10])), validate=False)
    with pytest.raises(IllConditionedPairError):
        connection_difference(MetricPair(M, h), [0, 0], [1, 0], [1, 0])


def test_curvature_difference_identity_zero():
    M = euclidean(2)
    S = curvature_difference(MetricPair(M, M), [0.1, 0.2], [1, 0], [0, 1], [1, 1])
    assert np.max(np.abs(S)) < 1e-10


def test_curvature_difference_stereographic_sphere():
    pair = catalog_pairs()["stereographic"]
    p = np.array([0.3, -0.4])
    S = curvature_difference_batch(pair, p[None])[0]
    # R^g = 0 so S = -R^h; for constant curvature 1, R^h(V, W)Z = h(W, Z)V - h(V, Z)W
    lam = 4.0 / (1 + p @ p) ** 2
    e = np.eye(2)
    for V, W, Z in [(e[0], e[1], e[1]), (e[1], e[0], e[0]), (e[0], e[1], e[0])]:
        Rh = lam * (W @ Z) * V - lam * (V @ Z) * W
        got = np.einsum("abcd,b,c,d->a", S, Z, V, W)
        assert np.max(np.abs(got + Rh)) < 1e-4


def test_curvature_difference_linear_frames_zero():
    g = linear_frame_plane([[1.0, 0.3], [0.0, 2.0]])
    h = linear_frame_plane([[2.0, -0.5], [0.1, 1.0]])
    S = curvature_difference(MetricPair(g, h), [0.2, 0.1], [1, 0], [0, 1], [1, 1])
    assert np.max(np.abs(S)) < 1e-8


def test_cyA_bounded_H_stable_under_halving():
    for name, pair in catalog_pairs().items():
        p = np.array([0.3, 0.2])
        a = tensor_norm(pair.g, connection_difference_field(pair), p, 2)
        half = catalog_pairs(fd_step=0.5 * pair.g.fd_step)[name]
        b = tensor_norm(half.g, connection_difference_field(half), p, 2)
        assert math.isfinite(a) and abs(a - b) / a < 0.05
