"""Initial capsule shapes as maps from the unit sphere.

A shape is a diffeomorphism ``phi`` from the unit sphere to the capsule
surface.  Built-in shapes also expose the Jacobian and Hessian of a smooth
extension of ``phi`` to R^3; those are only used by the analytic reference
computations, never by the solver.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ellipeinc, ellipkinc

from .atlas import N_PATCHES, Grid
from .errors import ConfigurationError


class Shape:
    def __call__(self, x0):
        raise NotImplementedError

    def jacobian(self, x0):
        """``(..., 3, 3)`` derivative of the extension of ``phi``."""
        raise NotImplementedError(f"{type(self).__name__} has no analytic derivatives")

    def hessian(self, x0):
        """``(..., 3, 3, 3)`` second derivative, ``H[..., a, b, c] = d_b d_c phi_a``."""
        raise NotImplementedError(f"{type(self).__name__} has no analytic derivatives")


@dataclass(frozen=True)
class Ellipsoid(Shape):
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        bad = [name for name in "abc" if not getattr(self, name) > 0]
        if bad:
            raise ConfigurationError(f"ellipsoid semi-axes must be positive: {', '.join(bad)}")

    @property
    def axes(self):
        return np.array([self.a, self.b, self.c])

    def __call__(self, x0):
        return np.asarray(x0, float) * self.axes

    def jacobian(self, x0):
        x0 = np.asarray(x0, float)
        return np.broadcast_to(np.diag(self.axes), x0.shape + (3,)).copy()

    def hessian(self, x0):
        x0 = np.asarray(x0, float)
        return np.zeros(x0.shape + (3, 3))

    @property
    def volume(self):
        return 4 * np.pi / 3 * self.a * self.b * self.c

    @property
    def area(self):
        """Exact surface area via incomplete elliptic integrals."""
        a, b, c = sorted(self.axes, reverse=True)
        if np.isclose(a, c, rtol=1e-14, atol=0):
            return 4 * np.pi * a**2
        phi = np.arccos(c / a)
        k2 = a**2 * (b**2 - c**2) / (b**2 * (a**2 - c**2))
        s = np.sin(phi)
        elliptic = ellipeinc(phi, k2) * s**2 + ellipkinc(phi, k2) * np.cos(phi) ** 2
        return 2 * np.pi * c**2 + 2 * np.pi * a * b * elliptic / s


def Sphere(radius=1.0):
    return Ellipsoid(radius, radius, radius)


class RadialShape(Shape):
    """Star-shaped surface ``rho(u, v) * beta(u, v)`` in spherical angles."""

    def __init__(self, rho):
        self.rho = rho

    def radius(self, x0):
        x0 = np.asarray(x0, float)
        u = np.arctan2(np.hypot(x0[..., 0], x0[..., 1]), x0[..., 2])
        v = np.arctan2(x0[..., 1], x0[..., 0])
        r = np.asarray(self.rho(u, v), float)
        if np.any(r <= 0):
            raise ConfigurationError("radial profile must be positive")
        return r

    def __call__(self, x0):
        return self.radius(x0)[..., None] * np.asarray(x0, float)


# Real part of the orthonormal Y_3^2 is Y32_SCALE * (x^2 - y^2) z on the sphere.
Y32_SCALE = 0.25 * np.sqrt(105 / (2 * np.pi))


class FourBump(RadialShape):
    """``rho = 1 + exp(-3 Re Y_3^2(u, v))``, written as a polynomial exponent in x, y, z."""

    def __init__(self, amplitude=3.0):
        self.amplitude = amplitude
        super().__init__(self._rho_uv)

    def _rho_uv(self, u, v):
        su = np.sin(u)
        return 1 + np.exp(-self.amplitude * Y32_SCALE * su**2 * np.cos(u) * np.cos(2 * v))

    def _exponent_parts(self, x):
        k = -self.amplitude * Y32_SCALE
        X, Y, Z = x[..., 0], x[..., 1], x[..., 2]
        q = (X**2 - Y**2) * Z
        e = np.exp(k * q)
        grad_q = np.stack([2 * X * Z, -2 * Y * Z, X**2 - Y**2], axis=-1)
        hess_q = np.zeros(x.shape + (3,))
        hess_q[..., 0, 0] = 2 * Z
        hess_q[..., 1, 1] = -2 * Z
        hess_q[..., 0, 2] = hess_q[..., 2, 0] = 2 * X
        hess_q[..., 1, 2] = hess_q[..., 2, 1] = -2 * Y
        return k, e, grad_q, hess_q

    def radius(self, x0):
        x0 = np.asarray(x0, float)
        _, e, _, _ = self._exponent_parts(x0)
        return 1 + e

    def jacobian(self, x0):
        x0 = np.asarray(x0, float)
        k, e, gq, _ = self._exponent_parts(x0)
        g = (k * e)[..., None] * gq
        rho = 1 + e
        return x0[..., :, None] * g[..., None, :] + rho[..., None, None] * np.eye(3)

    def hessian(self, x0):
        x0 = np.asarray(x0, float)
        k, e, gq, hq = self._exponent_parts(x0)
        g = (k * e)[..., None] * gq
        H = (k * e)[..., None, None] * (k * gq[..., :, None] * gq[..., None, :] + hq)
        eye = np.eye(3)
        out = x0[..., :, None, None] * H[..., None, :, :]
        out += eye[:, :, None] * g[..., None, None, :]
        out += eye[:, None, :] * g[..., None, :, None]
        return out


def initial_shape(shape, grid: Grid):
    """Surface nodes ``phi(eta_i(U))`` and the sphere nodes they came from.

    Returns ``(X, X0)``, both ``(6, n, n, 3)``.
    """
    X0 = grid.sphere_nodes()
    X = np.asarray(shape(X0.reshape(-1, 3)), float).reshape(X0.shape)
    assert X.shape[0] == N_PATCHES
    return X, X0
