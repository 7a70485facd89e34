"""Smooth surface integrals and the regularized Stokes single-layer potential.

Smooth integrands use the partition-of-unity weighted trapezoidal rule on
each patch.  The single layer replaces the Stokeslet by a regularized kernel
with a patch-dependent length ``delta`` and is evaluated on a 4x spline
upsampled grid, then brought back to the base nodes.
"""
from __future__ import annotations

import numpy as np
from scipy.special import erf

from .atlas import DEFAULT_R0, N_PATCHES, Grid, pou_weights
from .errors import ConfigurationError, OrientationError
from .kernels import stokeslet_sum
from .splines import Resampler


def quadrature_weights(W, psi, h):
    """Per-node weights ``psi W h^2``."""
    return np.asarray(psi) * np.asarray(W) * h**2


def smooth_integral(field, weights):
    """Integral of nodal data ``(6, n, n, ...)`` against quadrature weights."""
    field = np.asarray(field, float)
    w = np.asarray(weights, float)
    return np.tensordot(w, field, axes=(tuple(range(3)), tuple(range(3))))


def volume(X, normal, weights):
    """Enclosed volume from the divergence theorem with ``M = (x, 0, 0)``.

    Raises
    ------
    OrientationError
        If the result is negative (inward normals).
    """
    X = np.asarray(X, float)
    V = smooth_integral(X[..., 0] * np.asarray(normal)[..., 0], weights)
    if V < 0:
        raise OrientationError(f"enclosed volume is negative ({V:.3e}); normals point inward")
    return float(V)


def smoothing_factors(r):
    """Smoothing functions ``(s1, s2)`` of the regularized kernel at ``r / delta``."""
    r = np.asarray(r, float)
    if np.any(r < 0):
        raise ValueError("dimensionless distance must be non-negative")
    e = np.exp(-(r**2)) / np.sqrt(np.pi)
    s1 = erf(r) - (2 / 3) * r * (2 * r**2 - 5) * e
    s2 = erf(r) - (2 / 3) * r * (4 * r**4 - 14 * r**2 + 3) * e
    return s1, s2


def regularized_stokeslet(x, y, f, delta, mu=1.0):
    """Velocity at ``x`` induced by a regularized point force ``f`` at ``y``.

    Broadcasts over leading axes.  Coincident points use the finite limit of
    the kernel.
    """
    if np.any(np.asarray(delta) <= 0):
        raise ValueError("regularization length must be positive")
    d = np.asarray(x, float) - np.asarray(y, float)
    f = np.asarray(f, float)
    delta = np.asarray(delta, float)
    r = np.linalg.norm(d, axis=-1)
    s1, s2 = smoothing_factors(r / delta)
    safe = np.where(r > 0, r, 1.0)
    a = np.where(r > 0, s1 / safe, 16 / (3 * delta * np.sqrt(np.pi)))
    b = np.where(r > 0, s2 / safe**3, 0.0)
    fd = np.sum(f * d, axis=-1)
    return (a[..., None] * f + (b * fd)[..., None] * d) / (8 * np.pi * mu)


def regularization_delta(X, C=1.0):
    """Per-patch length ``C * max distance between 8-neighbour grid nodes``.

    ``X`` is ``(6, n, n, 3)``; edge nodes use whichever neighbours exist.
    """
    if not C > 0:
        raise ConfigurationError("regularization constant C must be positive")
    X = np.asarray(X, float)
    pairs = [
        (X[:, 1:, :], X[:, :-1, :]),
        (X[:, :, 1:], X[:, :, :-1]),
        (X[:, 1:, 1:], X[:, :-1, :-1]),
        (X[:, 1:, :-1], X[:, :-1, 1:]),
    ]
    dmax = np.max([np.linalg.norm(a - b, axis=-1).max(axis=(1, 2)) for a, b in pairs], axis=0)
    return C * dmax


class SingleLayer:
    """Regularized single-layer operator for one grid.

    Parameters
    ----------
    grid
        Base discretization; its ``upsample`` factor sets the fine grid.
    r0
        Partition-of-unity support radius.
    summation
        ``None`` for direct summation, or an object with a
        ``__call__(targets, delta, sources, densities, mu)`` method such as
        :class:`capsim.fmm.FMMSummation`.
    """

    def __init__(self, grid: Grid, r0=DEFAULT_R0, summation=None):
        self.grid = grid
        self.resampler = Resampler(grid.nodes, grid.up_nodes)
        up = grid.sphere_nodes(upsampled=True)
        psi = pou_weights(up, r0)
        self.psi_up = np.stack([psi[i, ..., i] for i in range(N_PATCHES)])
        self.summation = summation
        self._source_mask = self.psi_up > 0

    def upsample(self, values):
        return self.resampler.upsample(values)

    def downsample(self, values, exact=False):
        return self.resampler.downsample(values, exact=exact)

    def weights_up(self, W):
        return quadrature_weights(self.upsample(W), self.psi_up, self.grid.h_up)

    def __call__(self, X, f, W, mu=1.0, C=1.0, targets="base", delta=None):
        """``S[f]`` at the base nodes.

        Parameters
        ----------
        X, f
            Surface nodes and density on the base grid, ``(6, n, n, 3)``.
        W
            Area element on the base grid, ``(6, n, n)``.
        targets
            ``"base"`` evaluates only at fine nodes that coincide with base
            nodes, which is exactly what spline downsampling of the full fine
            field returns; ``"all"`` evaluates every fine node and downsamples.
        delta
            Optional regularization length (scalar or one per patch) that
            replaces the neighbour-distance rule.
        """
        X, f, W = (np.asarray(a, float) for a in (X, f, W))
        n = self.grid.n
        if X.shape != (N_PATCHES, n, n, 3) or f.shape != X.shape or W.shape != X.shape[:3]:
            raise ConfigurationError("single layer inputs do not match the grid")
        X_up = self.upsample(X)
        f_up = self.upsample(f)
        w_up = self.weights_up(W)
        if delta is None:
            delta = regularization_delta(X_up, C)
        else:
            delta = np.broadcast_to(np.asarray(delta, float), (N_PATCHES,))
            if np.any(delta <= 0):
                raise ConfigurationError("regularization length must be positive")
        mask = self._source_mask
        sources = X_up[mask]
        dens = f_up[mask] * w_up[mask][:, None]
        if targets == "base" and self.resampler.injection is not None:
            idx = self.resampler.injection
            tX = X_up[:, idx][:, :, idx]
            tdelta = np.broadcast_to(delta[:, None, None], tX.shape[:3]).reshape(-1)
            u = self._sum(tX.reshape(-1, 3), tdelta, sources, dens, mu)
            return u.reshape(X.shape)
        if targets not in ("base", "all"):
            raise ValueError(f"unknown target set {targets!r}")
        tdelta = np.broadcast_to(delta[:, None, None], X_up.shape[:3]).reshape(-1)
        u = self._sum(X_up.reshape(-1, 3), tdelta, sources, dens, mu).reshape(X_up.shape)
        return self.downsample(u, exact=True)

    def _sum(self, targets, delta, sources, dens, mu):
        if self.summation is None:
            return stokeslet_sum(targets, delta, sources, dens, mu)
        return self.summation(targets, delta, sources, dens, mu)
