import numpy as np
import pytest

from capsim.errors import ConfigurationError
from capsim.shapes import Ellipsoid, FourBump, Sphere, initial_shape


def test_ellipsoid_maps_sphere_to_surface(grid8):
    e = Ellipsoid(0.6, 1, 1)
    X, X0 = initial_shape(e, grid8)
    np.testing.assert_allclose(np.sum((X / e.axes) ** 2, axis=-1), 1, atol=1e-14)
    np.testing.assert_allclose(np.linalg.norm(X0, axis=-1), 1, atol=1e-15)


def test_ellipsoid_area_and_volume():
    assert Sphere().area == pytest.approx(4 * np.pi)
    assert Sphere(2.0).volume == pytest.approx(32 * np.pi / 3)
    # prolate spheroid closed form
    a, c = 1.0, 2.0
    e = np.sqrt(1 - a**2 / c**2)
    exact = 2 * np.pi * a**2 * (1 + c / (a * e) * np.arcsin(e))
    assert Ellipsoid(a, a, c).area == pytest.approx(exact, rel=1e-12)
    assert Ellipsoid(c, a, a).area == pytest.approx(exact, rel=1e-12)


def test_invalid_axes():
    with pytest.raises(ConfigurationError):
        Ellipsoid(0.0, 1, 1)


@pytest.mark.parametrize("shape", [Ellipsoid(0.6, 1, 1.3), FourBump()])
def test_jacobian_and_hessian_match_differences(shape, rng):
    x = rng.normal(size=(20, 3))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    s = 1e-6
    J = shape.jacobian(x)
    H = shape.hessian(x)
    for b in range(3):
        e = np.zeros(3)
        e[b] = s
        np.testing.assert_allclose(J[..., b], (shape(x + e) - shape(x - e)) / (2 * s), atol=1e-7)
        np.testing.assert_allclose(H[..., b], (shape.jacobian(x + e) - shape.jacobian(x - e)) / (2 * s), atol=1e-6)


def test_fourbump_is_radial():
    fb = FourBump()
    x = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    y = fb(x)
    np.testing.assert_allclose(np.cross(x, y), 0, atol=1e-15)
    assert np.all(np.linalg.norm(y, axis=-1) > 0)
