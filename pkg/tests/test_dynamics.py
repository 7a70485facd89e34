import numpy as np
import pytest

from capsim.atlas import Grid
from capsim.dynamics import (
    CapsuleModel,
    FlowSpec,
    background_velocity,
    error_norm,
    rkf45_advance,
    rkf45_step,
    simulate,
    taylor_asphericity,
)
from capsim.errors import ConfigurationError, StepSizeUnderflow
from capsim.membrane import MembraneParams
from capsim.shapes import Ellipsoid, Sphere, initial_shape


def test_shear_and_poiseuille_values():
    shear = FlowSpec("shear", 1.0)
    np.testing.assert_allclose(background_velocity(shear, [0, 1, 0]), [1, 0, 0])
    pois = FlowSpec("poiseuille", 1.0, 5.0)
    np.testing.assert_allclose(background_velocity(pois, [0, 0, 0]), [25, 0, 0])
    np.testing.assert_allclose(background_velocity(pois, [0, 3, 4]), [0, 0, 0], atol=1e-14)


def test_flow_switch_off():
    flow = FlowSpec("shear", 2.0, t_off=1.0)
    assert flow.active(0.5) and not flow.active(1.0)
    np.testing.assert_allclose(background_velocity(flow, [0, 1, 0], t=1.5), 0)
    assert not FlowSpec().active(0.0)
    # a step ending exactly at t_off still sees the flow in its last stage
    np.testing.assert_allclose(background_velocity(flow, [0, 1, 0], t=1.0, active=True), [2, 0, 0])


def test_flow_validation():
    with pytest.raises(ConfigurationError):
        FlowSpec("extensional")
    with pytest.raises(ConfigurationError):
        FlowSpec("poiseuille", R0=0.0)
    with pytest.raises(ConfigurationError):
        FlowSpec("shear", t_off=-1.0)


# ------------------------------------------------------------------ stepper

def test_rkf45_accepts_exact_polynomials():
    f = lambda t, y: np.array([4 * t**3])
    y4, y5 = rkf45_step(f, 0.0, np.array([0.0]), 1.0)
    assert y4[0] == pytest.approx(1.0, abs=1e-14)
    assert y5[0] == pytest.approx(1.0, abs=1e-14)


def test_error_norm_mixed():
    y4, y5 = np.array([1.0, 0.0]), np.array([1.0 + 1e-6, 1e-9])
    assert error_norm(y4, y5, 1e-6, 1e-9) == pytest.approx(1.0, rel=1e-6)


def test_adaptive_decay_meets_tolerance():
    seen = []
    traj = rkf45_advance(lambda t, y: -y, 0.0, np.array([1.0]), 2.0, tol=1e-6,
                         callback=lambda t, y, r: seen.append(t))
    assert traj.t == 2.0 and seen[-1] == 2.0
    assert abs(traj.y[0] - np.exp(-2)) < 1e-5
    assert traj.accepted == len(seen)


def test_fixed_step_orders():
    f = lambda t, y: np.cos(t) * y
    exact = np.exp(np.sin(2.0))
    for order, expected in ((4, 4.0), (5, 5.0)):
        errs = [abs(rkf45_advance(f, 0, np.array([1.0]), 2.0, fixed_dt=2.0 / n, order=order).y[0] - exact)
                for n in (40, 80, 160)]
        slope = -np.polyfit(np.log([40, 80, 160]), np.log(errs), 1)[0]
        assert abs(slope - expected) < 0.3


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_underflow_raises():
    # a finite-time blow-up drives the step to zero
    f = lambda t, y: y**2
    with pytest.raises(StepSizeUnderflow) as info:
        rkf45_advance(f, 0.0, np.array([1.0]), 2.0, tol=1e-8)
    assert info.value.t < 1.0


def test_stepper_validation():
    with pytest.raises(ConfigurationError):
        rkf45_advance(lambda t, y: y, 0, np.ones(1), 1, tol=0)
    with pytest.raises(ConfigurationError):
        rkf45_advance(lambda t, y: y, 0, np.ones(1), 1, order=3)


# ------------------------------------------------------------------ model

@pytest.fixture(scope="module")
def grid():
    return Grid(8)


def _model(grid, shape, flow=FlowSpec()):
    X, _ = initial_shape(shape, grid)
    return CapsuleModel(grid, X, MembraneParams(), flow), X


def test_stress_free_capsule_follows_flow(grid):
    model, X = _model(grid, Ellipsoid(0.8, 1, 1), FlowSpec("shear"))
    u = model.velocity(0.0, X)
    np.testing.assert_allclose(u, background_velocity(model.flow, X), atol=1e-12)
    assert model.evaluations == 1


def test_inflated_sphere_has_no_flow(grid):
    # a uniform normal load is balanced by pressure and drives no motion
    model, X = _model(grid, Sphere())
    u = model.velocity(0.0, 1.05 * X)
    f = model.force(1.05 * X)
    assert np.abs(u).max() < 1e-2 * np.abs(f).max()


def test_translation_invariance(grid, rng):
    model, X = _model(grid, Ellipsoid(0.8, 1, 1))
    Y = X * [1.1, 0.95, 1.0]
    shift = rng.normal(size=3)
    np.testing.assert_allclose(model.velocity(0, Y + shift), model.velocity(0, Y), atol=1e-10)


def test_sphere_moments_and_asphericity(grid):
    model, X = _model(grid, Sphere())
    d = model.diagnostics(0.0, X)
    assert d.Da == pytest.approx(0.0, abs=1e-3)
    np.testing.assert_allclose(d.centroid, 0, atol=1e-12)
    np.testing.assert_allclose(d.J, 4 * np.pi / 15 * np.eye(3), atol=2e-3)
    assert d.grad_phi > 0
    assert set(d.record()) >= {"t", "area", "volume", "Da", "Jxy"}


def test_asphericity_grows_with_elongation(grid):
    values = []
    for c in (1.0, 1.2, 1.5):
        model, X = _model(grid, Ellipsoid(c, 1, 1))
        d = model.diagnostics(0.0, X)
        values.append(d.Da)
        expected = (c - 1) / (c + 1)
        assert d.Da == pytest.approx(expected, abs=2e-3)
    assert values[0] < values[1] < values[2]


def test_taylor_formula_direct():
    V = 1.0
    J = np.diag([4.0, 1.0, 1.0]) * 2 * V
    assert taylor_asphericity(J, V) == pytest.approx(1 / 3)


def test_relaxation_keeps_volume(grid):
    model, X = _model(grid, Ellipsoid(0.9, 1, 1), FlowSpec("shear", t_off=0.05))
    traj = simulate(model, X, 0.1, tol=1e-5)
    assert traj.t == 0.1
    assert any(abs(r.t - 0.05) < 1e-15 for r in traj.log if r.accepted)
    v0 = model.diagnostics(0, X).volume
    v1 = model.diagnostics(0.1, traj.y).volume
    assert abs(v1 - v0) / v0 < 1e-2
