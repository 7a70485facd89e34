"""Overset finite-difference calculus on the six-patch surface discretization.

Derivatives of a field sampled on the base grids are computed in three steps:

1. *extension*: ghost values outside each coordinate square are filled with
   partition-of-unity weighted spline interpolants of the covering patches;
2. *differencing*: a centred 7-point stencil along each grid line;
3. *blending*: every node's ``(g_u, g_v)`` is replaced by the weighted
   average over all covering patches, pulled back through the transition
   Jacobians.

Tangent vectors are chart dependent, so second derivatives of the surface
use a covariant variant of the same pipeline: ghost tangents are transformed
with the transition Jacobian and blended second derivatives pick up the
transition Hessian term.

All interpolation and blending weights depend only on the parameterization,
so they are assembled once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .atlas import (
    DEFAULT_R0,
    N_PATCHES,
    Grid,
    chart_inverse,
    chart_point,
    pou_weights,
    transition_hessian,
    transition_jacobian,
)
from .errors import DegenerateGeometryError
from .splines import TensorSpline

STENCIL = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
GHOST = 3


@dataclass
class SurfaceGeometry:
    """Differential geometry at the base nodes, every array ``(6, n, n[, 3])``."""

    xu: np.ndarray
    xv: np.ndarray
    xuu: np.ndarray
    xuv: np.ndarray
    xvv: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    W: np.ndarray
    normal: np.ndarray
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray
    H: np.ndarray
    K: np.ndarray


class _Transfer:
    """Weighted spline pulls from covering patches onto target nodes.

    Each *pair* couples one target node of patch ``i`` to one source patch
    ``j``; ``apply`` evaluates all pairs with one sparse product and scatters
    weighted sums back onto the targets.
    """

    def __init__(self, spline, n_targets, rows, patches, us, vs, psi, jac=None, hess=None):
        self.rows = rows
        self.psi = psi
        self.jac = jac
        self.hess = hess
        self.interp = spline.operator(patches, us, vs)
        self.scatter = sp.csr_matrix(
            (np.ones(rows.size), (rows, np.arange(rows.size))), shape=(n_targets, rows.size)
        )

    def pull(self, coef):
        return self.interp @ coef

    def push(self, weights, values):
        return self.scatter @ (weights[:, None] * values)


def _flatten_trailing(g):
    g = np.asarray(g, float)
    return g.reshape(g.shape[:3] + (-1,)), g.shape[3:]


def _dot(a, b):
    return np.einsum("...i,...i", a, b)


class OversetCalculus:
    """Precomputed extension, difference and blending operators for one grid."""

    def __init__(self, grid: Grid, r0=DEFAULT_R0):
        self.grid = grid
        self.r0 = r0
        self.n = n = grid.n
        self.spline = TensorSpline(grid.nodes)
        self.sphere_nodes = grid.sphere_nodes()
        self.psi_all = pou_weights(self.sphere_nodes, r0)  # (6, n, n, 6)
        self.psi = np.stack([self.psi_all[i, ..., i] for i in range(N_PATCHES)])

        e = np.arange(n + 2 * GHOST)
        eu, ev = np.meshgrid(e, e, indexing="ij")
        inner = (eu >= GHOST) & (eu < n + GHOST) & (ev >= GHOST) & (ev < n + GHOST)
        self._ghost_u, self._ghost_v = eu[~inner], ev[~inner]
        gu = (self._ghost_u - GHOST + 1) * grid.h
        gv = (self._ghost_v - GHOST + 1) * grid.h
        # ghost points lie outside the own chart's square, and for the corner
        # ghosts the own patch may cover them too, so every patch is a source
        self._ext = self._transfer(gu, gv, include_self=True, hessian=False)
        uv = grid.parameters().reshape(-1, 2)
        self._blend = self._transfer(uv[:, 0], uv[:, 1], include_self=False, hessian=True)

    def _transfer(self, u, v, include_self, hessian):
        per_patch = u.size
        rows, patches, us, vs, psis, jacs, hesses = [], [], [], [], [], [], []
        for i in range(N_PATCHES):
            x = chart_point(i, u, v)
            psi = pou_weights(x, self.r0)
            for j in range(N_PATCHES):
                if j == i and not include_self:
                    continue
                sel = np.nonzero(psi[:, j] > 0)[0]
                if sel.size == 0:
                    continue
                uj, vj = chart_inverse(j, x[sel])
                rows.append(i * per_patch + sel)
                patches.append(np.full(sel.size, j))
                us.append(uj)
                vs.append(vj)
                psis.append(psi[sel, j])
                if j == i:
                    jacs.append(np.broadcast_to(np.eye(2), (sel.size, 2, 2)))
                else:
                    jacs.append(transition_jacobian(i, j, u[sel], v[sel]))
                if hessian:
                    hesses.append(transition_hessian(i, j, u[sel], v[sel]))
        cat = np.concatenate
        return _Transfer(
            self.spline,
            N_PATCHES * per_patch,
            cat(rows),
            cat(patches),
            cat(us),
            cat(vs),
            cat(psis),
            cat(jacs),
            cat(hesses) if hessian else None,
        )

    def _coef(self, flat):
        return self.spline.coefficients(flat).reshape(N_PATCHES * self.n**2, flat.shape[-1])

    def _place_ghosts(self, inner, ghosts):
        n, d = self.n, inner.shape[-1]
        ext = np.empty((N_PATCHES, n + 2 * GHOST, n + 2 * GHOST, d))
        ext[:, GHOST : n + GHOST, GHOST : n + GHOST] = inner
        ext[:, self._ghost_u, self._ghost_v] = ghosts.reshape(N_PATCHES, -1, d)
        return ext

    # -- the three steps --------------------------------------------------

    def extend_field(self, g):
        """Values on the extended grids, shape ``(6, n+6, n+6, ...)``."""
        flat, trailing = _flatten_trailing(g)
        T = self._ext
        ghosts = T.push(T.psi, T.pull(self._coef(flat)))
        ext = self._place_ghosts(flat, ghosts)
        return ext.reshape(ext.shape[:3] + trailing)

    def partial_uv(self, ext):
        """Centred 7-point differences of extended data at the base nodes."""
        ext = np.asarray(ext, float)
        n, h = self.n, self.grid.h
        core = slice(GHOST, n + GHOST)
        offsets = [(s, c) for s, c in zip(range(-3, 4), STENCIL) if c]
        gu = sum(c * ext[:, GHOST + s : n + GHOST + s, core] for s, c in offsets)
        gv = sum(c * ext[:, core, GHOST + s : n + GHOST + s] for s, c in offsets)
        return gu / h, gv / h

    def blend(self, gu, gv):
        """Partition-of-unity average of per-patch derivatives across patches."""
        fu, trailing = _flatten_trailing(gu)
        fv, _ = _flatten_trailing(gv)
        T = self._blend
        pu, pv = T.pull(self._coef(fu)), T.pull(self._coef(fv))
        psi = self.psi[..., None]
        shape = fu.shape
        J = T.jac
        bu = psi * fu + T.push(T.psi * J[:, 0, 0], pu).reshape(shape)
        bu += T.push(T.psi * J[:, 0, 1], pv).reshape(shape)
        bv = psi * fv + T.push(T.psi * J[:, 1, 0], pu).reshape(shape)
        bv += T.push(T.psi * J[:, 1, 1], pv).reshape(shape)
        out = fu.shape[:3] + trailing
        return bu.reshape(out), bv.reshape(out)

    def derivatives(self, g, blend=True):
        """Blended ``(g_u, g_v)`` at the base nodes of a chart-independent field."""
        gu, gv = self.partial_uv(self.extend_field(g))
        if blend:
            gu, gv = self.blend(gu, gv)
        return gu, gv

    def second_derivatives(self, xu, xv, blend=True):
        """``(x_uu, x_uv, x_vv)`` from the tangent fields of a surface.

        The mixed derivative is the average of both differentiation orders.
        """
        tangents = [np.asarray(t, float) for t in (xu, xv)]
        coefs = [self._coef(t) for t in tangents]
        E = self._ext
        pulled = [E.pull(c) for c in coefs]
        ext = []
        for b in range(2):
            ghosts = sum(E.push(E.psi * E.jac[:, b, c], pulled[c]) for c in range(2))
            ext.append(self._place_ghosts(tangents[b], ghosts))
        # raw[d][c] = d_d of tangent c
        raw = [[None, None], [None, None]]
        for c in range(2):
            raw[0][c], raw[1][c] = self.partial_uv(ext[c])
        if blend:
            raw = self._blend_second(tangents, coefs, raw)
        xuv = 0.5 * (raw[0][1] + raw[1][0])
        return raw[0][0], xuv, raw[1][1]

    def _blend_second(self, tangents, coefs, raw):
        T = self._blend
        J, Hs, w = T.jac, T.hess, T.psi
        shape = tangents[0].shape
        pT = [T.pull(c) for c in coefs]
        pS = [[T.pull(self._coef(raw[d][c])) for c in range(2)] for d in range(2)]
        psi = self.psi[..., None]
        out = [[None, None], [None, None]]
        for a in range(2):
            for b in range(2):
                acc = psi * raw[a][b]
                for c in range(2):
                    acc = acc + T.push(w * Hs[:, a, b, c], pT[c]).reshape(shape)
                    for d in range(2):
                        acc = acc + T.push(w * J[:, b, c] * J[:, a, d], pS[d][c]).reshape(shape)
                out[a][b] = acc
        return out

    # -- geometry ---------------------------------------------------------

    def geometry(self, X, blend=True):
        """First and second fundamental forms, normal and curvatures of ``X``.

        The normal is oriented outward (by the sign of the enclosed volume),
        which makes the mean curvature of a unit sphere equal to -1.

        Raises
        ------
        DegenerateGeometryError
            If the area element is not positive at some node.
        """
        X = np.asarray(X, float)
        xu, xv = self.derivatives(X, blend)
        E, F, G = _dot(xu, xu), _dot(xu, xv), _dot(xv, xv)
        W2 = E * G - F**2
        if not np.all(W2 > 0):
            bad = int(np.sum(~(W2 > 0)))
            raise DegenerateGeometryError(f"non-positive area element at {bad} nodes")
        W = np.sqrt(W2)
        normal = np.cross(xu, xv) / W[..., None]
        if np.sum(self.psi * W * _dot(X, normal)) < 0:
            normal = -normal
        xuu, xuv, xvv = self.second_derivatives(xu, xv, blend)
        L, M, N = _dot(xuu, normal), _dot(xuv, normal), _dot(xvv, normal)
        H = (E * N - 2 * F * M + G * L) / (2 * W2)
        K = (L * N - M**2) / W2
        return SurfaceGeometry(xu, xv, xuu, xuv, xvv, E, F, G, W, normal, L, M, N, H, K)

    def first_fundamental_form(self, X, blend=True):
        """Tangents and area element only; skips the second-derivative pass."""
        xu, xv = self.derivatives(X, blend)
        E, F, G = _dot(xu, xu), _dot(xu, xv), _dot(xv, xv)
        W2 = E * G - F**2
        if not np.all(W2 > 0):
            raise DegenerateGeometryError("non-positive area element")
        return xu, xv, E, F, G, np.sqrt(W2)

    def _metric_terms(self, geom, extra):
        shape = geom.E.shape + (1,) * extra
        E, F, G = (a.reshape(shape) for a in (geom.E, geom.F, geom.G))
        W2 = (geom.W**2).reshape(shape)
        xu = geom.xu.reshape(geom.xu.shape[:3] + (1,) * extra + (3,))
        xv = geom.xv.reshape(geom.xv.shape[:3] + (1,) * extra + (3,))
        return E, F, G, W2, xu, xv

    def surface_divergence(self, g, geom: SurfaceGeometry, blend=True):
        """Surface divergence of a vector field ``(6, n, n, 3)``.

        Tensor fields ``(6, n, n, 3, 3)`` are treated row by row, giving a
        vector.
        """
        g = np.asarray(g, float)
        gu, gv = self.derivatives(g, blend)
        E, F, G, W2, xu, xv = self._metric_terms(geom, g.ndim - 4)
        a = np.sum((G[..., None] * gu - F[..., None] * gv) * xu, axis=-1)
        b = np.sum((E[..., None] * gv - F[..., None] * gu) * xv, axis=-1)
        return (a + b) / W2

    def surface_gradient(self, g, geom: SurfaceGeometry, blend=True):
        """Surface gradient of scalar data ``(6, n, n, ...)``; appends an axis of 3."""
        g = np.asarray(g, float)
        gu, gv = self.derivatives(g, blend)
        E, F, G, W2, xu, xv = self._metric_terms(geom, g.ndim - 3)
        E, F, G, W2 = (a[..., None] for a in (E, F, G, W2))
        cu = (G * xu - F * xv) / W2
        cv = (E * xv - F * xu) / W2
        return cu * gu[..., None] + cv * gv[..., None]
