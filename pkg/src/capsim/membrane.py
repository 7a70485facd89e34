"""Skalak-type elastic membrane: deformation, stress and interfacial force.

Material points are grid nodes, so the deformation between the reference
and the current configuration is known node by node through the tangents of
both surfaces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateDeformationError, DegenerateGeometryError
from .surfderiv import OversetCalculus, SurfaceGeometry

_COND_MAX = 1e12
_NEG_TOL = 1e-10


@dataclass(frozen=True)
class MembraneParams:
    """Shear modulus ``Es``, dilatation modulus ``ED`` and fluid viscosity ``mu``."""

    Es: float = 2.0
    ED: float = 20.0
    mu: float = 1.0

    def __post_init__(self):
        problems = [f"{k} must be positive" for k in ("Es", "mu") if not getattr(self, k) > 0]
        if not self.ED >= 0:
            problems.append("ED must be non-negative")
        if problems:
            raise ConfigurationError("; ".join(problems), problems)


@dataclass(frozen=True)
class ReferenceState:
    """Tangents and unit normal of the stress-free configuration at every node."""

    a1r: np.ndarray
    a2r: np.ndarray
    nr: np.ndarray

    @classmethod
    def from_geometry(cls, geom: SurfaceGeometry):
        return cls(geom.xu.copy(), geom.xv.copy(), geom.normal.copy())

    @classmethod
    def from_surface(cls, calc: OversetCalculus, X):
        xu, xv, *_, W = calc.first_fundamental_form(X)
        normal = np.cross(xu, xv) / W[..., None]
        if np.sum(calc.psi * W * np.einsum("...i,...i", X, normal)) < 0:
            normal = -normal
        return cls(xu, xv, normal)


@dataclass
class MembraneState:
    FS: np.ndarray
    V2: np.ndarray
    lam2: np.ndarray  # (..., 2), larger first
    I1: np.ndarray
    I2: np.ndarray
    Js: np.ndarray
    P: np.ndarray
    Lam: np.ndarray


def deformation_gradient(a1r, a2r, nr, a1, a2):
    """Relative surface deformation gradient ``F_S``, shape ``(..., 3, 3)``.

    Solves ``F_S a1r = a1``, ``F_S a2r = a2``, ``F_S nr = 0``.
    """
    ref = np.stack([a1r, a2r, nr], axis=-1)
    cond = np.linalg.cond(ref)
    if not np.all(cond < _COND_MAX):
        raise DegenerateGeometryError("singular reference frame")
    cur = np.stack([a1, a2, np.zeros_like(a1)], axis=-1)
    # F ref = cur  <=>  ref^T F^T = cur^T
    FT = np.linalg.solve(np.swapaxes(ref, -1, -2), np.swapaxes(cur, -1, -2))
    return np.swapaxes(FT, -1, -2)


def projector(n):
    n = np.asarray(n, float)
    return np.eye(3) - n[..., :, None] * n[..., None, :]


def invariants(FS, n):
    """``(V2, lam2, I1, I2, Js, P)`` of a surface deformation gradient.

    Raises
    ------
    DegenerateDeformationError
        If a principal stretch is (numerically) negative or the area ratio
        is not positive.
    """
    V2 = FS @ np.swapaxes(FS, -1, -2)
    tr = np.trace(V2, axis1=-2, axis2=-1)
    # rank <= 2, so the second invariant is the product of the two stretches
    s2 = 0.5 * (tr**2 - np.einsum("...ij,...ji", V2, V2))
    disc = np.sqrt(np.maximum(tr**2 - 4 * s2, 0.0))
    lam2 = np.stack([0.5 * (tr + disc), 0.5 * (tr - disc)], axis=-1)
    if np.any(lam2 < -_NEG_TOL):
        raise DegenerateDeformationError("negative squared principal stretch")
    lam2 = np.maximum(lam2, 0.0)
    if not np.all(s2 > 0):
        raise DegenerateDeformationError("non-positive area ratio J_s")
    I1 = tr - 2
    I2 = s2 - 1
    Js = np.sqrt(s2)
    return V2, lam2, I1, I2, Js, projector(n)


def stress_tensor(V2, P, Js, I1, I2, params: MembraneParams):
    Es, ED = params.Es, params.ED
    a = (Es / (2 * Js)) * (I1 + 1)
    b = (Js / 2) * (ED * I2 - Es)
    return a[..., None, None] * V2 + b[..., None, None] * P


def membrane_state(ref: ReferenceState, geom: SurfaceGeometry, params: MembraneParams):
    FS = deformation_gradient(ref.a1r, ref.a2r, ref.nr, geom.xu, geom.xv)
    V2, lam2, I1, I2, Js, P = invariants(FS, geom.normal)
    Lam = stress_tensor(V2, P, Js, I1, I2, params)
    return MembraneState(FS, V2, lam2, I1, I2, Js, P, Lam)


def interfacial_force(Lam, geom: SurfaceGeometry, calc: OversetCalculus):
    """Row-wise surface divergence of the stress tensor field."""
    return calc.surface_divergence(Lam, geom)


def isotropic_tension(lam, params: MembraneParams):
    """Scalar tension ``T`` with ``Lambda = T P`` for a uniform stretch ``lam``."""
    l2 = lam**2
    return params.Es / 2 * (2 * l2 - 1) + l2 / 2 * (params.ED * (l2**2 - 1) - params.Es)
