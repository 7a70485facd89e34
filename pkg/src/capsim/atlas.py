"""Six-patch atlas of the unit sphere.

Every chart is a signed axis permutation of the spherical-angle map

    beta(u, v) = (sin u cos v, sin u sin v, cos u),   (u, v) in (0, pi)^2,

so chart ``i`` is ``R[i] @ beta(u, v)`` and covers an open hemisphere centred
at ``R[i] @ (0, 1, 0)``.  Patch indices are 0-based (0..5).

The module also holds the bump-function partition of unity, the discretization
grids and the transition maps between charts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AtlasDomainError, ConfigurationError

N_PATCHES = 6
DEFAULT_R0 = 5 * np.pi / 12

# eta_i(u, v) = ROTATIONS[i] @ beta(u, v); all have determinant +1, so the
# normal x_u cross x_v points outward on every chart.
ROTATIONS = np.array(
    [
        [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        [[-1, 0, 0], [0, -1, 0], [0, 0, 1]],
        [[0, 1, 0], [-1, 0, 0], [0, 0, 1]],
        [[0, -1, 0], [1, 0, 0], [0, 0, 1]],
        [[1, 0, 0], [0, 0, -1], [0, 1, 0]],
        [[1, 0, 0], [0, 0, 1], [0, -1, 0]],
    ],
    dtype=float,
)

PATCH_CENTERS = ROTATIONS @ np.array([0.0, 1.0, 0.0])

_CLAMP_TOL = 1e-12


def _check_patch(i):
    if not (0 <= int(i) < N_PATCHES) or int(i) != i:
        raise IndexError(f"patch index {i!r} outside 0..{N_PATCHES - 1}")
    return int(i)


def _rotate(i, y):
    return np.einsum("ab,...b->...a", ROTATIONS[i], y)


def _unrotate(j, x):
    return np.einsum("ba,...b->...a", ROTATIONS[j], x)


def spherical_point(u, v):
    u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
    su = np.sin(u)
    return np.stack([su * np.cos(v), su * np.sin(v), np.cos(u)], axis=-1)


def chart_point(i, u, v):
    """Point ``eta_i(u, v)`` on the unit sphere.

    The chart expressions extend naturally beyond ``(0, pi)^2``, which is how
    ghost nodes of the extended grid are placed.
    """
    i = _check_patch(i)
    return _rotate(i, spherical_point(u, v))


def chart_derivatives(i, u, v):
    """Return ``(x, x_u, x_v, x_uu, x_uv, x_vv)`` of chart ``i``, each ``(..., 3)``."""
    i = _check_patch(i)
    u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
    su, cu, sv, cv = np.sin(u), np.cos(u), np.sin(v), np.cos(v)
    zero = np.zeros_like(u)
    base = np.stack([su * cv, su * sv, cu], axis=-1)
    bu = np.stack([cu * cv, cu * sv, -su], axis=-1)
    bv = np.stack([-su * sv, su * cv, zero], axis=-1)
    buv = np.stack([-cu * sv, cu * cv, zero], axis=-1)
    bvv = np.stack([-su * cv, -su * sv, zero], axis=-1)
    return tuple(_rotate(i, b) for b in (base, bu, bv, -base, buv, bvv))


def chart_inverse(j, x):
    """Parameters ``(u, v)`` of sphere points ``x`` in chart ``j``.

    ``u`` is returned in ``[0, pi]`` and ``v`` in ``[-pi/2, 3pi/2)`` so that
    points of the open hemisphere of chart ``j`` land in ``(0, pi)^2``.
    """
    j = _check_patch(j)
    y = _unrotate(j, np.asarray(x, float))
    rho = np.hypot(y[..., 0], y[..., 1])
    u = np.arctan2(rho, y[..., 2])
    v = np.arctan2(y[..., 1], y[..., 0])
    v = np.where(v < -np.pi / 2, v + 2 * np.pi, v)
    return u, v


def in_hemisphere(j, x, tol=_CLAMP_TOL):
    """True where ``x`` lies in the (closed, up to ``tol``) hemisphere of chart ``j``."""
    return _unrotate(j, np.asarray(x, float))[..., 1] >= -tol


def transition(i, j, u, v, check=True):
    """Transition map ``tau_ij``: parameters in chart ``i`` to chart ``j``.

    With ``check=False`` points outside patch ``j`` are mapped through the
    natural extension of chart ``j`` (``v`` in ``[-pi/2, 3pi/2)``).

    Raises
    ------
    AtlasDomainError
        If ``check`` is set and any point does not belong to patch ``j``.
    """
    i, j = _check_patch(i), _check_patch(j)
    x = chart_point(i, u, v)
    if check and not np.all(in_hemisphere(j, x)):
        raise AtlasDomainError(f"points outside the overlap of patches {i} and {j}")
    return chart_inverse(j, x)


def transition_jacobian(i, j, u, v, check=True):
    """Jacobian of ``tau_ij`` laid out as ``[[du'/du, dv'/du], [du'/dv, dv'/dv]]``.

    With that layout the chain rule reads ``[g_u, g_v]^i = J @ [g_u, g_v]^j``.
    """
    i, j = _check_patch(i), _check_patch(j)
    x, xu, xv = chart_derivatives(i, u, v)[:3]
    if check and not np.all(in_hemisphere(j, x)):
        raise AtlasDomainError(f"points outside the overlap of patches {i} and {j}")
    y, yu, yv = (_unrotate(j, a) for a in (x, xu, xv))
    rho2 = y[..., 0] ** 2 + y[..., 1] ** 2
    rho = np.sqrt(rho2)

    def d_angles(dy):
        drho = (y[..., 0] * dy[..., 0] + y[..., 1] * dy[..., 1]) / rho
        du = y[..., 2] * drho - rho * dy[..., 2]
        dv = (y[..., 0] * dy[..., 1] - y[..., 1] * dy[..., 0]) / rho2
        return du, dv

    du_u, dv_u = d_angles(yu)
    du_v, dv_v = d_angles(yv)
    row_u = np.stack([du_u, dv_u], axis=-1)
    row_v = np.stack([du_v, dv_v], axis=-1)
    return np.stack([row_u, row_v], axis=-2)


def transition_hessian(i, j, u, v):
    """Second derivatives of ``tau_ij``, ``out[..., a, b, c] = d_a d_b tau_ij^(c)``.

    Obtained by fourth-order Richardson differencing of the analytic Jacobian;
    the result is accurate to about 1e-12.
    """
    u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
    s = 1e-3

    def d(du, dv):
        f = lambda k: transition_jacobian(i, j, u + k * du, v + k * dv)
        return (8 * (f(s) - f(-s)) - (f(2 * s) - f(-2 * s))) / (12 * s)

    return np.stack([d(1, 0), d(0, 1)], axis=-3)


def bump(r):
    """Compactly supported bump ``exp(2 exp(-1/|r|) / (|r| - 1))`` on ``|r| < 1``."""
    r = np.abs(np.asarray(r, float))
    out = np.zeros_like(r)
    inside = r < 1
    rr = r[inside]
    with np.errstate(divide="ignore"):
        out[inside] = np.exp(2 * np.exp(-1 / rr) / (rr - 1))
    return out


def great_circle_distance(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    cross = np.linalg.norm(np.cross(x, y), axis=-1)
    return np.arctan2(cross, np.sum(x * y, axis=-1))


def pou_weights(x0, r0=DEFAULT_R0):
    """Partition-of-unity weights of all six patches at sphere points.

    Returns an array of shape ``x0.shape[:-1] + (6,)`` whose last axis sums
    to one.
    """
    x0 = np.asarray(x0, float)
    norms = np.linalg.norm(x0, axis=-1)
    if np.any(np.abs(norms - 1) > 1e-10):
        raise ValueError("pou_weights expects points on the unit sphere")
    d = great_circle_distance(x0[..., None, :], PATCH_CENTERS)
    b = bump(d / r0)
    total = b.sum(axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise ConfigurationError(f"r0={r0} leaves points of the sphere uncovered")
    return b / total


def pou_weight(i, x0, r0=DEFAULT_R0):
    return pou_weights(x0, r0)[..., _check_patch(i)]


@dataclass(frozen=True)
class Grid:
    """Uniform ``m``-th order grids on the six coordinate squares.

    Base nodes are ``j pi / m`` for ``j = 1..m-1``; the extended grid adds three
    ghost layers per side (``j = -2..m+2``); the upsampled grid has order
    ``upsample * m``.
    """

    m: int
    upsample: int = 4

    @property
    def h(self):
        return np.pi / self.m

    @property
    def n(self):
        return self.m - 1

    @property
    def nodes(self):
        return np.arange(1, self.m) * self.h

    @property
    def ext_nodes(self):
        return np.arange(-2, self.m + 3) * self.h

    @property
    def N(self):
        return N_PATCHES * self.n**2

    @property
    def m_up(self):
        return self.upsample * self.m

    @property
    def n_up(self):
        return self.m_up - 1

    @property
    def h_up(self):
        return np.pi / self.m_up

    @property
    def up_nodes(self):
        return np.arange(1, self.m_up) * self.h_up

    @property
    def N_up(self):
        return N_PATCHES * self.n_up**2

    def parameters(self, upsampled=False):
        """Parameter pairs of the base (or upsampled) nodes, shape ``(n, n, 2)``."""
        t = self.up_nodes if upsampled else self.nodes
        uu, vv = np.meshgrid(t, t, indexing="ij")
        return np.stack([uu, vv], axis=-1)

    def sphere_nodes(self, upsampled=False):
        """Nodes ``eta_i(U)`` on the unit sphere, shape ``(6, n, n, 3)``."""
        uv = self.parameters(upsampled)
        return np.stack([chart_point(i, uv[..., 0], uv[..., 1]) for i in range(N_PATCHES)])


def build_grids(m, upsample=4):
    if int(m) != m or m < 8:
        raise ConfigurationError(f"grid order m={m} too small for the 7-point stencil (need m >= 8)")
    if int(upsample) != upsample or upsample < 1:
        raise ConfigurationError(f"upsample factor must be a positive integer, got {upsample}")
    return Grid(int(m), int(upsample))
