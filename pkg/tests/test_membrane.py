import numpy as np
import pytest

from capsim.errors import ConfigurationError, DegenerateDeformationError
from capsim.membrane import (
    MembraneParams,
    ReferenceState,
    deformation_gradient,
    interfacial_force,
    invariants,
    isotropic_tension,
    membrane_state,
)
from capsim.shapes import Ellipsoid, Sphere, initial_shape
from capsim.surfderiv import OversetCalculus


def test_params_validation():
    with pytest.raises(ConfigurationError):
        MembraneParams(Es=0.0)
    with pytest.raises(ConfigurationError):
        MembraneParams(mu=-1.0)


def test_identity_deformation(rng):
    a1, a2 = rng.normal(size=(2, 5, 3))
    n = np.cross(a1, a2)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    F = deformation_gradient(a1, a2, n, a1, a2)
    V2, lam2, I1, I2, Js, P = invariants(F, n)
    np.testing.assert_allclose(V2, P, atol=1e-12)
    np.testing.assert_allclose(lam2, 1, atol=1e-12)
    np.testing.assert_allclose(I1, 0, atol=1e-12)
    np.testing.assert_allclose(I2, 0, atol=1e-12)


def test_uniaxial_stretch_invariants():
    a1 = np.array([[1.0, 0, 0]])
    a2 = np.array([[0, 1.0, 0]])
    n = np.array([[0, 0, 1.0]])
    F = deformation_gradient(a1, a2, n, 2 * a1, a2)
    _, lam2, I1, I2, Js, _ = invariants(F, n)
    np.testing.assert_allclose(lam2, [[4, 1]])
    assert I1[0] == pytest.approx(3)
    assert I2[0] == pytest.approx(3)
    assert Js[0] == pytest.approx(2)


def test_collapsed_element_raises():
    a1 = np.array([[1.0, 0, 0]])
    a2 = np.array([[0, 1.0, 0]])
    n = np.array([[0, 0, 1.0]])
    with pytest.raises(DegenerateDeformationError):
        invariants(deformation_gradient(a1, a2, n, a1, 0 * a2), n)


@pytest.mark.parametrize("m", [8, 16])
def test_stress_free_force_vanishes(m):
    from capsim.atlas import Grid

    grid = Grid(m)
    calc = OversetCalculus(grid)
    X, _ = initial_shape(Ellipsoid(0.6, 1, 1), grid)
    g = calc.geometry(X)
    params = MembraneParams()
    st = membrane_state(ReferenceState.from_geometry(g), g, params)
    f = interfacial_force(st.Lam, g, calc)
    assert np.abs(f).max() < 1e-8 * params.Es / np.sqrt(0.6**2 + 2) / 2


def test_inflated_sphere_force(grid16):
    calc = OversetCalculus(grid16)
    X, _ = initial_shape(Sphere(), grid16)
    ref = ReferenceState.from_geometry(calc.geometry(X))
    lam = 1.05
    g = calc.geometry(lam * X)
    params = MembraneParams()
    f = interfacial_force(membrane_state(ref, g, params).Lam, g, calc)
    T = isotropic_tension(lam, params)
    np.testing.assert_allclose(np.linalg.norm(f, axis=-1), 2 * T / lam, rtol=1e-3)
    # tension pulls inward
    assert np.all(np.einsum("...i,...i", f, X) < 0)


def test_isotropic_tension_zero_at_rest():
    assert isotropic_tension(1.0, MembraneParams()) == pytest.approx(0.0)
