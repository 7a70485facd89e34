"""Capsule evolution: background flows, the velocity functional, RKF45 and diagnostics.

The surface nodes are material points, so the state is just the array of
node positions ``X`` of shape ``(6, n, n, 3)``.  Its time derivative is the
background flow plus the single-layer potential of the membrane force.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .atlas import DEFAULT_R0, Grid
from .errors import ConfigurationError, StepSizeUnderflow
from .membrane import MembraneParams, ReferenceState, interfacial_force, membrane_state
from .quadrature import SingleLayer, quadrature_weights, smooth_integral, volume
from .surfderiv import OversetCalculus, SurfaceGeometry

FLOW_KINDS = ("none", "shear", "poiseuille")


@dataclass(frozen=True)
class FlowSpec:
    """Imposed far-field flow.

    ``rate`` is the shear rate for ``"shear"`` and the curvature ``alpha`` for
    ``"poiseuille"``.  After ``t_off`` (if set) the flow is switched off.
    """

    kind: str = "none"
    rate: float = 1.0
    R0: float = 5.0
    t_off: float | None = None

    def __post_init__(self):
        problems = []
        if self.kind not in FLOW_KINDS:
            problems.append(f"flow kind must be one of {FLOW_KINDS}, got {self.kind!r}")
        if self.kind == "poiseuille" and not self.R0 > 0:
            problems.append("poiseuille radius R0 must be positive")
        if self.t_off is not None and not self.t_off >= 0:
            problems.append("flow switch-off time must be non-negative")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)

    def active(self, t):
        return self.kind != "none" and (self.t_off is None or t < self.t_off)


def background_velocity(flow: FlowSpec, x, t=0.0, active=None):
    """``u_inf(x, t)`` for points ``x`` of shape ``(..., 3)``.

    ``active`` overrides the switch-off test, so a step that ends exactly at
    ``t_off`` can still see the flow in its last stage.
    """
    x = np.asarray(x, float)
    u = np.zeros_like(x)
    if not (flow.active(t) if active is None else active):
        return u
    if flow.kind == "shear":
        u[..., 0] = flow.rate * x[..., 1]
    else:
        u[..., 0] = flow.rate * (flow.R0**2 - x[..., 1] ** 2 - x[..., 2] ** 2)
    return u


# ---------------------------------------------------------------- diagnostics


@dataclass
class Diagnostics:
    t: float
    area: float
    volume: float
    centroid: np.ndarray
    J: np.ndarray
    Da: float
    grad_phi: float

    def record(self):
        """Flat dict for the tabular diagnostics series."""
        J = self.J
        return {
            "t": self.t, "area": self.area, "volume": self.volume, "Da": self.Da,
            "grad_phi": self.grad_phi,
            "Jxx": J[0, 0], "Jyy": J[1, 1], "Jzz": J[2, 2], "Jxy": J[0, 1], "Jxz": J[0, 2], "Jyz": J[1, 2],
        }


def second_moments(X, normal, weights):
    """Volume, centroid and centred second-moment tensor of the enclosed region.

    Uses ``div(y y_p y_q) = 5 y_p y_q`` and ``div(x x_p) = 4 x_p`` so that only
    surface integrals are needed.
    """
    V = volume(X, normal, weights)
    xn = np.einsum("...i,...i", X, normal)
    centroid = smooth_integral(X * xn[..., None], weights) / (4 * V)
    Y = X - centroid
    yn = np.einsum("...i,...i", Y, normal)
    J = smooth_integral(Y[..., :, None] * Y[..., None, :] * yn[..., None, None], weights) / 5
    return V, centroid, J


def taylor_asphericity(J, V):
    """``(L - S) / (L + S)`` from the in-plane (x, y) moments."""
    jxx, jyy, jxy = J[0, 0], J[1, 1], J[0, 1]
    root = np.sqrt((jxx - jyy) ** 2 + 4 * jxy**2)
    S = np.sqrt(max(jxx + jyy - root, 0.0) / (2 * V))
    L = np.sqrt((jxx + jyy + root) / (2 * V))
    return float((L - S) / (L + S))


# ---------------------------------------------------------------- the model


class CapsuleModel:
    """Velocity functional of a capsule on one grid.

    Parameters
    ----------
    grid
        Discretization (base order and upsampling factor).
    X_ref
        Stress-free reference node positions, usually the initial shape.
    params, flow
        Membrane moduli with viscosity, and the imposed flow.
    C
        Regularization constant of the single layer.
    summation
        ``None`` for direct summation or an FMM summation object.
    """

    def __init__(self, grid: Grid, X_ref, params: MembraneParams, flow: FlowSpec,
                 r0=DEFAULT_R0, C=1.0, summation=None, blend=True):
        self.grid, self.params, self.flow = grid, params, flow
        self.C, self.blend = C, blend
        self.calc = OversetCalculus(grid, r0)
        self.layer = SingleLayer(grid, r0, summation)
        self.reference = ReferenceState.from_geometry(self.calc.geometry(np.asarray(X_ref, float), blend))
        self.sphere_geometry = self.calc.geometry(grid.sphere_nodes(), blend)
        self.evaluations = 0

    @property
    def shape(self):
        n = self.grid.n
        return (6, n, n, 3)

    def geometry(self, X) -> SurfaceGeometry:
        return self.calc.geometry(X, self.blend)

    def force(self, X, geom=None):
        """Membrane force density ``div_gamma Lambda`` at the base nodes."""
        geom = self.geometry(X) if geom is None else geom
        state = membrane_state(self.reference, geom, self.params)
        return interfacial_force(state.Lam, geom, self.calc)

    def velocity(self, t, X, flow_active=None):
        """``u_inf(X, t) + S[f](X)`` at the base nodes."""
        X = np.asarray(X, float).reshape(self.shape)
        geom = self.geometry(X)
        f = self.force(X, geom)
        u = self.layer(X, f, geom.W, mu=self.params.mu, C=self.C)
        self.evaluations += 1
        return u + background_velocity(self.flow, X, t, flow_active)

    def weights(self, geom):
        return quadrature_weights(geom.W, self.calc.psi, self.grid.h)

    def gradient_norm(self, X):
        """Max over nodes of the Frobenius norm of the surface gradient of ``X``
        with respect to the unit sphere."""
        grad = self.calc.surface_gradient(np.asarray(X, float), self.sphere_geometry, self.blend)
        return float(np.sqrt(np.sum(grad**2, axis=(-2, -1))).max())

    def diagnostics(self, t, X, geom=None) -> Diagnostics:
        X = np.asarray(X, float).reshape(self.shape)
        geom = self.geometry(X) if geom is None else geom
        w = self.weights(geom)
        V, centroid, J = second_moments(X, geom.normal, w)
        return Diagnostics(
            t=float(t), area=float(w.sum()), volume=V, centroid=centroid, J=J,
            Da=taylor_asphericity(J, V), grad_phi=self.gradient_norm(X),
        )

    def atol(self, X):
        """Absolute floor of the step-error norm: 1e-12 of the bounding-box diagonal."""
        pts = np.asarray(X).reshape(-1, 3)
        return 1e-12 * float(np.linalg.norm(np.ptp(pts, axis=0)))


# ---------------------------------------------------------------- RKF45

# Fehlberg's 4(5) pair
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = [
    [],
    [1 / 4],
    [3 / 32, 9 / 32],
    [1932 / 2197, -7200 / 2197, 7296 / 2197],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
]
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])

SAFETY = 0.9
MIN_FACTOR, MAX_FACTOR = 0.2, 5.0


def rkf45_step(f, t, y, dt, k1=None):
    """One Fehlberg step; returns the 4th- and 5th-order solutions."""
    k = [f(t, y) if k1 is None else k1]
    for s in range(1, 6):
        inc = sum(a * ki for a, ki in zip(_A[s], k))
        k.append(f(t + _C[s] * dt, y + dt * inc))
    y4 = y + dt * sum(b * ki for b, ki in zip(_B4, k) if b)
    y5 = y + dt * sum(b * ki for b, ki in zip(_B5, k) if b)
    return y4, y5


def error_norm(y4, y5, rtol, atol):
    """``max |y5 - y4| / (atol + rtol |y5|)``; a step is acceptable when this is at most 1."""
    return float(np.max(np.abs(y5 - y4) / (atol + rtol * np.abs(y5))))


@dataclass
class StepRecord:
    t: float
    dt: float
    accepted: bool
    err: float


@dataclass
class Trajectory:
    t: float
    y: np.ndarray
    dt: float
    log: list = field(default_factory=list)

    @property
    def accepted(self):
        return sum(r.accepted for r in self.log)

    @property
    def rejected(self):
        return sum(not r.accepted for r in self.log)


def rkf45_advance(f: Callable, t0, y0, t_end, tol=1e-6, dt0=None, atol=0.0, fixed_dt=None,
                  order=4, callback=None, max_steps=1_000_000):
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t_end``.

    Parameters
    ----------
    tol
        Relative tolerance of the embedded error estimate.
    atol
        Absolute floor in the error norm, a float or a callable of ``y``.
    fixed_dt
        If given, take uniform steps of (about) this size with no error control.
    order
        Which solution to propagate, 4 (default) or 5.
    callback
        Called as ``callback(t, y, record)`` after every accepted step.

    Raises
    ------
    StepSizeUnderflow
        If the controller drives the step below ``1e-12`` of the horizon.
    """
    if not tol > 0:
        raise ConfigurationError("tolerance must be positive")
    if order not in (4, 5):
        raise ConfigurationError("order must be 4 or 5")
    t, y = float(t0), np.array(y0, dtype=float)
    horizon = float(t_end) - t
    traj = Trajectory(t, y, 0.0)
    if horizon <= 0:
        return traj
    pick = (lambda lo, hi: lo) if order == 4 else (lambda lo, hi: hi)

    if fixed_dt is not None:
        steps = max(1, int(round(horizon / fixed_dt)))
        dt = horizon / steps
        for s in range(steps):
            y4, y5 = rkf45_step(f, t, y, dt)
            y = pick(y4, y5)
            t = t0 + (s + 1) * dt
            rec = StepRecord(t, dt, True, float("nan"))
            traj.log.append(rec)
            if callback is not None:
                callback(t, y, rec)
        traj.t, traj.y, traj.dt = float(t_end), y, dt
        return traj

    floor = lambda v: atol(v) if callable(atol) else atol
    k1 = f(t, y)
    if dt0 is None:
        scale = np.max(np.abs(y)) + 1e-300
        rate = np.max(np.abs(k1))
        dt0 = 0.01 * scale / rate if rate > 0 else horizon
    dt = min(float(dt0), horizon)
    dt_min = 1e-12 * horizon
    for _ in range(max_steps):
        if t_end - t <= 1e-14 * abs(horizon):
            break
        last = dt >= t_end - t
        if last:
            dt = t_end - t
        y4, y5 = rkf45_step(f, t, y, dt, k1)
        ratio = error_norm(y4, y5, tol, floor(y))
        if not np.isfinite(ratio):
            ratio = np.inf
        accepted = ratio <= 1.0
        rec = StepRecord(t + dt if accepted else t, dt, accepted, ratio * tol)
        traj.log.append(rec)
        factor = MAX_FACTOR if ratio == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * ratio ** -0.2))
        if accepted:
            t = t_end if last else t + dt
            y = pick(y4, y5)
            if callback is not None:
                callback(t, y, rec)
            if t < t_end:
                k1 = f(t, y)
            traj.dt = dt
            dt *= factor
        else:
            dt *= min(factor, 1.0)
            if dt < dt_min:
                raise StepSizeUnderflow(t, dt, y)
    else:
        raise StepSizeUnderflow(t, dt, y)
    traj.t, traj.y = float(t_end), y
    return traj


def simulate(model: CapsuleModel, X0, t_end, tol=1e-6, callback=None, dt0=None):
    """Advance ``X0`` to ``t_end``, stopping exactly at the flow switch-off time.

    The flow state is frozen per segment so no step straddles the switch.
    """
    breaks = [b for b in (model.flow.t_off,) if b is not None and 0 < b < t_end]
    t, y, log = 0.0, np.asarray(X0, float), []
    dt = dt0
    for stop in breaks + [float(t_end)]:
        on = model.flow.active(t)
        f = lambda s, v, on=on: model.velocity(s, v, on)
        traj = rkf45_advance(f, t, y, stop, tol, dt0=dt, atol=model.atol, callback=callback)
        t, y, dt = traj.t, traj.y, traj.dt or dt
        log.extend(traj.log)
    return Trajectory(t, y, dt or 0.0, log)
