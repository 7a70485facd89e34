import numpy as np
import pytest

from capsim.errors import ConfigurationError, OrientationError
from capsim.quadrature import (
    SingleLayer,
    quadrature_weights,
    regularization_delta,
    regularized_stokeslet,
    smooth_integral,
    smoothing_factors,
    volume,
)
from capsim.shapes import Ellipsoid, Sphere, initial_shape
from capsim.surfderiv import OversetCalculus


def test_smoothing_factors_limits():
    s1, s2 = smoothing_factors(np.array([0.0, 8.0]))
    np.testing.assert_allclose([s1[0], s2[0]], 0, atol=1e-15)
    np.testing.assert_allclose([s1[1], s2[1]], 1, atol=1e-15)
    with pytest.raises(ValueError):
        smoothing_factors(-1.0)


def test_regularized_kernel_far_field_and_limit(rng):
    y = np.zeros(3)
    f = rng.normal(size=3)
    x = np.array([3.0, 1.0, -2.0])
    r = np.linalg.norm(x)
    plain = (f / r + np.dot(f, x) * x / r**3) / (8 * np.pi)
    np.testing.assert_allclose(regularized_stokeslet(x, y, f, 0.1), plain, rtol=1e-12)
    at_zero = regularized_stokeslet(y, y, f, 0.5)
    near = regularized_stokeslet(np.array([1e-7, 0, 0]), y, f, 0.5)
    np.testing.assert_allclose(at_zero, near, rtol=1e-6)
    with pytest.raises(ValueError):
        regularized_stokeslet(x, y, f, 0.0)


def _sphere(grid):
    calc = OversetCalculus(grid)
    X, _ = initial_shape(Sphere(), grid)
    return calc, X, calc.geometry(X)


def test_sphere_area_and_volume(grid16):
    calc, X, g = _sphere(grid16)
    w = quadrature_weights(g.W, calc.psi, grid16.h)
    assert smooth_integral(np.ones_like(g.W), w) == pytest.approx(4 * np.pi, rel=2e-4)
    assert volume(X, g.normal, w) == pytest.approx(4 * np.pi / 3, rel=2e-4)
    with pytest.raises(OrientationError):
        volume(X, -g.normal, w)


def test_delta_rule_per_patch(grid8):
    _, X, _ = _sphere(grid8)
    d = regularization_delta(X, 2.0)
    assert d.shape == (6,)
    np.testing.assert_allclose(d, d[0], rtol=1e-12)
    assert d[0] == pytest.approx(2 * regularization_delta(X)[0])
    with pytest.raises(ConfigurationError):
        regularization_delta(X, 0.0)


def test_constant_density_on_sphere(grid16):
    calc, X, g = _sphere(grid16)
    c = np.array([1.0, -2.0, 0.5])
    f = np.broadcast_to(c, X.shape)
    u = SingleLayer(grid16)(X, f, g.W, mu=2.0)
    np.testing.assert_allclose(u, np.broadcast_to(c / 3, u.shape), atol=1e-5)


def test_base_targets_match_downsampled_full_field(grid8, rng):
    calc, X, g = _sphere(grid8)
    f = X * rng.normal(size=3)
    layer = SingleLayer(grid8)
    np.testing.assert_allclose(layer(X, f, g.W), layer(X, f, g.W, targets="all"), atol=1e-12)


def test_delta_override(grid8):
    calc = OversetCalculus(grid8)
    X, _ = initial_shape(Ellipsoid(0.6, 1, 1), grid8)
    g = calc.geometry(X)
    layer = SingleLayer(grid8)
    auto = regularization_delta(layer.upsample(X))
    np.testing.assert_allclose(layer(X, X, g.W, delta=auto), layer(X, X, g.W), atol=1e-15)
    with pytest.raises(ConfigurationError):
        layer(X, X, g.W, delta=-1.0)
    with pytest.raises(ConfigurationError):
        layer(X[:, :-1], X, g.W)
