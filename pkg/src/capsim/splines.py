"""Tensor-product cubic spline interpolation on the per-patch grids.

Splines use not-a-knot end conditions and are stored in B-spline form, so an
interpolation operator factors into a dense coefficient solve (one small
matrix per axis) followed by a sparse 16-nonzero-per-row evaluation.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import BSpline

from .atlas import N_PATCHES

_K = 3


class NodalSpline:
    """Cubic not-a-knot spline space on a fixed 1D node set."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, float)
        if nodes.size < 4:
            raise ValueError("need at least 4 nodes for a not-a-knot cubic")
        self.nodes = nodes
        self.n = nodes.size
        self.knots = np.concatenate([[nodes[0]] * 4, nodes[2:-2], [nodes[-1]] * 4])
        collocation = self.design(nodes).toarray()
        self.inverse = np.linalg.inv(collocation)

    def design(self, t):
        return BSpline.design_matrix(np.asarray(t, float).ravel(), self.knots, _K, extrapolate=True)

    def basis(self, t):
        """Indices and values of the 4 active B-splines at each of ``t``."""
        B = self.design(t)
        return B.indices.reshape(-1, 4), B.data.reshape(-1, 4)

    def cardinal(self, t):
        """Dense ``(len(t), n)`` matrix mapping nodal values to values at ``t``."""
        return self.design(t) @ self.inverse


class TensorSpline:
    """Interpolation on the six ``n x n`` patch grids sharing one node set."""

    def __init__(self, nodes):
        self.axis = NodalSpline(nodes)
        self.n = self.axis.n

    def coefficients(self, values):
        """B-spline coefficients of patch data ``(6, n, n, ...)`` (same shape)."""
        values = np.asarray(values, float)
        inv = self.axis.inverse
        moved = np.moveaxis(values, (1, 2), (-2, -1))
        coef = inv @ moved @ inv.T
        return np.moveaxis(coef, (-2, -1), (1, 2))

    def operator(self, patch, u, v, weights=None):
        """Sparse matrix from flattened coefficients ``(6 n^2,)`` to points.

        Row ``r`` evaluates the spline of patch ``patch[r]`` at ``(u[r], v[r])``,
        scaled by ``weights[r]``.
        """
        patch = np.asarray(patch, int).ravel()
        iu, bu = self.axis.basis(u)
        iv, bv = self.axis.basis(v)
        n = self.n
        cols = patch[:, None, None] * n * n + iu[:, :, None] * n + iv[:, None, :]
        vals = bu[:, :, None] * bv[:, None, :]
        if weights is not None:
            vals = vals * np.asarray(weights, float).ravel()[:, None, None]
        rows = np.repeat(np.arange(patch.size), 16)
        return sp.csr_matrix(
            (vals.ravel(), (rows, cols.ravel())), shape=(patch.size, N_PATCHES * n * n)
        )

    def evaluate(self, values, patch, u, v):
        values = np.asarray(values, float)
        coef = self.coefficients(values)
        trailing = values.shape[3:]
        flat = coef.reshape(N_PATCHES * self.n**2, -1)
        out = self.operator(patch, u, v) @ flat
        return out.reshape((-1,) + trailing)


class Resampler:
    """Per-patch spline transfer between a coarse and a fine tensor grid."""

    def __init__(self, coarse_nodes, fine_nodes):
        self.coarse = NodalSpline(coarse_nodes)
        self.fine = NodalSpline(fine_nodes)
        self.up_matrix = self.coarse.cardinal(fine_nodes)
        self.down_matrix = self.fine.cardinal(coarse_nodes)
        # coarse nodes that coincide with fine nodes make downsampling an injection
        ratio = (self.fine.n + 1) / (self.coarse.n + 1)
        self.injection = None
        if abs(ratio - round(ratio)) < 1e-12:
            idx = int(round(ratio)) * np.arange(1, self.coarse.n + 1) - 1
            if np.allclose(np.asarray(fine_nodes)[idx], coarse_nodes, rtol=0, atol=1e-13):
                self.injection = idx

    @staticmethod
    def _apply(mat, values):
        values = np.asarray(values, float)
        moved = np.moveaxis(values, (1, 2), (-2, -1))
        out = mat @ moved @ mat.T
        return np.moveaxis(out, (-2, -1), (1, 2))

    def upsample(self, values):
        return self._apply(self.up_matrix, values)

    def downsample(self, values, exact=False):
        """Spline-interpolate fine-grid data at the coarse nodes.

        When the coarse nodes are a subset of the fine nodes the interpolant
        reproduces the data there, so this reduces to picking those nodes;
        ``exact=True`` forces the general dense evaluation instead.
        """
        if self.injection is not None and not exact:
            idx = self.injection
            return np.asarray(values, float)[:, idx][:, :, idx]
        return self._apply(self.down_matrix, values)
