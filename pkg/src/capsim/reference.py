"""Independent reference values used to verify the discrete operators.

Nothing here shares code with the overset calculus or the regularized
quadrature: geometry comes from the chain rule applied to analytic shape
derivatives, and the single-layer potential from a polar Gauss quadrature
whose pole sits at the target.
"""
from __future__ import annotations

import numpy as np

from .atlas import N_PATCHES, Grid, chart_derivatives


def relative_error(q, q_ref):
    """``max |q - q_ref| / max |q_ref|`` with vector magnitudes on a trailing axis of 3."""
    q, q_ref = np.asarray(q, float), np.asarray(q_ref, float)
    if q_ref.ndim >= 1 and q_ref.shape[-1] == 3 and q_ref.ndim == 5:
        num = np.linalg.norm(q - q_ref, axis=-1).max()
        den = np.linalg.norm(q_ref, axis=-1).max()
    else:
        num = np.abs(q - q_ref).max()
        den = np.abs(q_ref).max()
    return num / den


def exact_geometry(shape, grid: Grid):
    """Tangents, normals and curvatures of ``shape`` at the base nodes.

    Returns a dict with keys ``x, xu, xv, xuu, xuv, xvv, E, F, G, W, normal,
    L, M, N, H, K``.
    """
    uv = grid.parameters()
    out = {key: [] for key in ("x", "xu", "xv", "xuu", "xuv", "xvv")}
    for i in range(N_PATCHES):
        e, eu, ev, euu, euv, evv = chart_derivatives(i, uv[..., 0], uv[..., 1])
        D = shape.jacobian(e)
        D2 = shape.hessian(e)
        out["x"].append(shape(e))
        out["xu"].append(np.einsum("...ab,...b->...a", D, eu))
        out["xv"].append(np.einsum("...ab,...b->...a", D, ev))
        second = lambda p, q, pq: (
            np.einsum("...abc,...b,...c->...a", D2, p, q) + np.einsum("...ab,...b->...a", D, pq)
        )
        out["xuu"].append(second(eu, eu, euu))
        out["xuv"].append(second(eu, ev, euv))
        out["xvv"].append(second(ev, ev, evv))
    g = {key: np.stack(val) for key, val in out.items()}
    dot = lambda a, b: np.einsum("...i,...i", a, b)
    g["E"], g["F"], g["G"] = dot(g["xu"], g["xu"]), dot(g["xu"], g["xv"]), dot(g["xv"], g["xv"])
    W2 = g["E"] * g["G"] - g["F"] ** 2
    g["W"] = np.sqrt(W2)
    g["normal"] = np.cross(g["xu"], g["xv"]) / g["W"][..., None]
    g["L"], g["M"], g["N"] = (dot(g[k], g["normal"]) for k in ("xuu", "xuv", "xvv"))
    g["H"] = (g["E"] * g["N"] - 2 * g["F"] * g["M"] + g["G"] * g["L"]) / (2 * W2)
    g["K"] = (g["L"] * g["N"] - g["M"] ** 2) / W2
    return g


def quadratic_field(x):
    """The test density ``(x^2, y^2, z^2)``."""
    return np.asarray(x, float) ** 2


def quadratic_divergence(x, normal):
    """Exact surface divergence of ``(x^2, y^2, z^2)``: ``tr(P grad g)``."""
    x, normal = np.asarray(x, float), np.asarray(normal, float)
    return 2 * x.sum(axis=-1) - 2 * np.sum(normal**2 * x, axis=-1)


def _frames(x0):
    x0 = np.asarray(x0, float)
    helper = np.where(np.abs(x0[:, :1]) < 0.9, [[1.0, 0, 0]], [[0, 1.0, 0]])
    e1 = np.cross(x0, helper)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(x0, e1)
    return e1, e2


def single_layer_reference(shape, x0, density, mu=1.0, n_theta=64, n_phi=64, batch=64):
    """Exact Stokes single layer at ``shape(x0)`` by polar quadrature.

    Each target's sphere preimage ``x0`` becomes the pole of a spherical
    coordinate system.  In those coordinates the weakly singular integrand
    times the area element is smooth, so Gauss-Legendre in the polar angle and
    the trapezoidal rule in the azimuth converge spectrally.

    Parameters
    ----------
    shape
        Map from the unit sphere with an analytic ``jacobian``.
    x0
        ``(T, 3)`` target preimages on the unit sphere.
    density
        Callable mapping surface points ``(..., 3)`` to densities ``(..., 3)``.
    """
    x0 = np.asarray(x0, float).reshape(-1, 3)
    gt, gw = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * np.pi * (gt + 1)
    wt = 0.5 * np.pi * gw
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    w = (wt[:, None] * np.full(n_phi, 2 * np.pi / n_phi)[None, :]).ravel()
    ct, st = np.cos(th).ravel(), np.sin(th).ravel()
    cp, sp_ = np.cos(ph).ravel(), np.sin(ph).ravel()
    out = np.empty((len(x0), 3))
    for start in range(0, len(x0), batch):
        p = x0[start : start + batch]
        e1, e2 = _frames(p)
        radial = cp[None, :, None] * e1[:, None] + sp_[None, :, None] * e2[:, None]
        y0 = ct[None, :, None] * p[:, None] + st[None, :, None] * radial
        y0_t = -st[None, :, None] * p[:, None] + ct[None, :, None] * radial
        y0_p = st[None, :, None] * (-sp_[None, :, None] * e1[:, None] + cp[None, :, None] * e2[:, None])
        D = shape.jacobian(y0)
        y = shape(y0)
        Xt = np.einsum("...ab,...b->...a", D, y0_t)
        Xp = np.einsum("...ab,...b->...a", D, y0_p)
        dA = np.linalg.norm(np.cross(Xt, Xp), axis=-1)
        fy = density(y)
        d = shape(p)[:, None] - y
        r = np.linalg.norm(d, axis=-1)
        r = np.where(r > 0, r, np.inf)  # theta never hits 0 with Gauss nodes
        fd = np.sum(fy * d, axis=-1)
        k = (fy / r[..., None] + (fd / r**3)[..., None] * d) * (dA * w)[..., None]
        out[start : start + batch] = k.sum(axis=1)
    return out / (8 * np.pi * mu)
