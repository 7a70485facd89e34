import numpy as np
import pytest

from capsim.atlas import (
    DEFAULT_R0,
    N_PATCHES,
    PATCH_CENTERS,
    Grid,
    bump,
    build_grids,
    chart_derivatives,
    chart_inverse,
    chart_point,
    great_circle_distance,
    pou_weight,
    pou_weights,
    transition,
    transition_hessian,
    transition_jacobian,
)
from capsim.errors import AtlasDomainError, ConfigurationError


def random_sphere(rng, n):
    x = rng.normal(size=(n, 3))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def overlap_points(rng, i, j, n=100):
    """Parameters in chart ``i`` whose points lie well inside patch ``j``."""
    out = []
    while len(out) < n:
        u, v = rng.uniform(0.05, np.pi - 0.05, 2)
        y = chart_point(i, u, v)
        uj, vj = chart_inverse(j, y)
        if 0.05 < uj < np.pi - 0.05 and 0.05 < vj < np.pi - 0.05:
            out.append((u, v))
    return np.array(out).T


def test_chart_values():
    np.testing.assert_allclose(chart_point(0, np.pi / 2, np.pi / 2), [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(chart_point(4, np.pi / 2, np.pi / 2), [0, 0, 1], atol=1e-15)


def test_patch_centres_are_signed_axes():
    assert sorted(map(tuple, np.round(PATCH_CENTERS).astype(int))) == sorted(
        [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    )


def test_unit_norm_on_extended_domain(rng):
    u, v = rng.uniform(-0.5, np.pi + 0.5, (2, 500))
    for i in range(N_PATCHES):
        np.testing.assert_allclose(np.linalg.norm(chart_point(i, u, v), axis=-1), 1, atol=1e-15)


def test_second_chart_is_half_turn_of_first(rng):
    u, v = rng.uniform(0, np.pi, (2, 100))
    np.testing.assert_allclose(chart_point(1, u, np.pi + v), chart_point(0, u, v), atol=1e-14)
    x = chart_point(1, np.pi / 3, np.pi / 4)
    y = chart_point(0, np.pi / 3, np.pi / 4)
    np.testing.assert_allclose(x[:2], -y[:2])
    assert x[2] == pytest.approx(y[2])


def test_chart_injective_on_open_square(rng):
    u, v = rng.uniform(0.01, np.pi - 0.01, (2, 400))
    for i in range(N_PATCHES):
        ub, vb = chart_inverse(i, chart_point(i, u, v))
        np.testing.assert_allclose(ub, u, atol=1e-12)
        np.testing.assert_allclose(vb, v, atol=1e-12)


def test_chart_derivatives_match_differences(rng):
    u, v = rng.uniform(0.2, 2.9, (2, 20))
    s = 1e-5
    for i in range(N_PATCHES):
        x, xu, xv, xuu, xuv, xvv = chart_derivatives(i, u, v)
        d = lambda f, du, dv: (f(u + s * du, v + s * dv) - f(u - s * du, v - s * dv)) / (2 * s)
        np.testing.assert_allclose(xu, d(lambda a, b: chart_point(i, a, b), 1, 0), atol=1e-9)
        np.testing.assert_allclose(xv, d(lambda a, b: chart_point(i, a, b), 0, 1), atol=1e-9)
        np.testing.assert_allclose(xuv, d(lambda a, b: chart_derivatives(i, a, b)[1], 0, 1), atol=1e-9)
        np.testing.assert_allclose(xuu, d(lambda a, b: chart_derivatives(i, a, b)[1], 1, 0), atol=1e-9)
        np.testing.assert_allclose(xvv, d(lambda a, b: chart_derivatives(i, a, b)[2], 0, 1), atol=1e-9)


def test_invalid_patch_index():
    with pytest.raises(IndexError):
        chart_point(6, 1.0, 1.0)
    with pytest.raises(IndexError):
        chart_point(-1, 1.0, 1.0)


def test_tau_01_is_v_shift():
    # patches 0 and 1 are antipodal hemispheres, so this is the extended map
    u, v = transition(0, 1, np.pi / 3, np.pi / 5, check=False)
    assert u == pytest.approx(np.pi / 3)
    assert v == pytest.approx(np.pi / 5 + np.pi)
    with pytest.raises(AtlasDomainError):
        transition(0, 1, np.pi / 3, np.pi / 5)


def test_transition_consistency(rng):
    for i in range(N_PATCHES):
        for j in range(N_PATCHES):
            if i == j or np.dot(PATCH_CENTERS[i], PATCH_CENTERS[j]) < -0.5:
                continue
            u, v = overlap_points(rng, i, j)
            uj, vj = transition(i, j, u, v)
            np.testing.assert_allclose(chart_point(j, uj, vj), chart_point(i, u, v), atol=1e-12)


def test_transition_jacobian_of_v_shift_is_identity(rng):
    u, v = rng.uniform(0.05, np.pi - 0.05, (2, 30))
    J = transition_jacobian(0, 1, u, v, check=False)
    np.testing.assert_allclose(J, np.broadcast_to(np.eye(2), J.shape), atol=1e-14)


def test_transition_jacobian_and_hessian_match_differences(rng):
    s = 1e-6
    for i, j in [(0, 2), (0, 4), (2, 5), (4, 1)]:
        u, v = overlap_points(rng, i, j, 20)
        J = transition_jacobian(i, j, u, v)
        for a, (du, dv) in enumerate([(1, 0), (0, 1)]):
            plus = np.stack(transition(i, j, u + s * du, v + s * dv), axis=-1)
            minus = np.stack(transition(i, j, u - s * du, v - s * dv), axis=-1)
            np.testing.assert_allclose(J[:, a, :], (plus - minus) / (2 * s), atol=1e-8)
            dJ = (transition_jacobian(i, j, u + s * du, v + s * dv) - transition_jacobian(i, j, u - s * du, v - s * dv)) / (2 * s)
            np.testing.assert_allclose(transition_hessian(i, j, u, v)[:, a], dJ, atol=1e-7)


def test_transition_outside_overlap_raises():
    # centre of patch 0 is antipodal to patch 1
    with pytest.raises(AtlasDomainError):
        transition(0, 1, np.pi / 2, np.pi / 2)


def test_bump_support_and_values():
    assert bump(0.0) == pytest.approx(1.0)
    assert bump(1.0) == 0.0 and bump(1.5) == 0.0
    r = np.linspace(0, 0.999, 200)
    assert np.all(np.diff(bump(r)) <= 0)


def test_pou_is_partition(rng):
    x = random_sphere(rng, 2000)
    w = pou_weights(x)
    np.testing.assert_allclose(w.sum(axis=-1), 1, atol=1e-15)
    assert w.min() >= 0
    d = great_circle_distance(x[:, None, :], PATCH_CENTERS)
    assert np.all(w[d >= DEFAULT_R0] == 0)


def test_pou_symmetry():
    # patch centre gets the largest weight of its patch
    for i, c in enumerate(PATCH_CENTERS):
        w = pou_weights(c)
        assert w[i] == w.max()
    w = pou_weight(0, np.array([1.0, 1.0, 1.0]) / np.sqrt(3))
    assert w == pytest.approx(1 / 3)


def test_pou_rejects_uncovering_radius():
    x = np.array([1.0, 1.0, 1.0]) / np.sqrt(3)
    with pytest.raises(ConfigurationError):
        pou_weights(x, r0=np.pi / 5)


def test_grid_counts():
    for m, N in [(8, 294), (16, 1350), (32, 5766), (64, 23814)]:
        g = Grid(m)
        assert g.N == N
        assert g.N_up == 6 * (4 * m - 1) ** 2
        assert g.ext_nodes.size == g.nodes.size + 6
        assert g.h == pytest.approx(np.pi / m)
    assert Grid(8).sphere_nodes().shape == (6, 7, 7, 3)


def test_build_grids_validation():
    with pytest.raises(ConfigurationError):
        build_grids(4)
    with pytest.raises(ConfigurationError):
        build_grids(16, upsample=0)
    assert build_grids(16).m_up == 64
