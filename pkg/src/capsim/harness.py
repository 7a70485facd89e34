"""Convergence suites that regenerate the reference error tables.

Each suite returns a :class:`Table` holding computed errors next to the
target values in :data:`TARGETS`.  A cell passes when the computed error
is at most :data:`TOLERANCE` times its target.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .atlas import DEFAULT_R0, Grid
from .dynamics import CapsuleModel, FlowSpec, simulate
from .errors import ConfigurationError
from .fmm import FMMSummation
from .membrane import MembraneParams
from .quadrature import SingleLayer, quadrature_weights, volume
from .reference import (
    exact_geometry,
    quadratic_divergence,
    quadratic_field,
    relative_error,
    single_layer_reference,
)
from .shapes import Ellipsoid, FourBump, Sphere, initial_shape
from .surfderiv import OversetCalculus

TOLERANCE = 3.0
SUITES = ("quad", "deriv", "selfconv", "fmm", "delta", "r0")

TARGETS = {
    "quad": {
        "ellipsoid": {
            "S": {8: 7e-3, 16: 4e-4, 32: 2e-5, 64: 1e-6},
            "A": {8: 5e-3, 16: 5e-4, 32: 1e-5, 64: 1e-6},
            "V": {8: 3e-3, 16: 4e-4, 32: 1e-5, 64: 1e-6},
        },
        "fourbump": {"S": {8: 4e-1, 16: 9e-2, 32: 8e-3, 64: 6e-4}},
    },
    "deriv": {
        "ellipsoid": {
            "n": {8: 5e-3, 16: 2e-4, 32: 1e-5, 64: 7e-7},
            "H": {8: 4e-3, 16: 5e-4, 32: 3e-5, 64: 2e-6},
            "K": {8: 6e-3, 16: 1e-4, 32: 6e-5, 64: 3e-6},
            "div": {8: 4e-2, 16: 3e-3, 32: 1e-4, 64: 1e-5},
        },
        "fourbump": {
            "n": {8: 2e-1, 16: 6e-2, 32: 6e-3, 64: 5e-4},
            "H": {8: 3e-1, 16: 1e-1, 32: 1e-2, 64: 1e-3},
            "K": {8: 8e-1, 16: 1e-1, 32: 2e-2, 64: 2e-3},
            "div": {8: 6e-1, 16: 3e-1, 32: 6e-2, 64: 5e-3},
        },
    },
    # unit sphere; keys are r0 / (pi / 12)
    "r0": {
        5.5: {"n": {8: 2e-4, 16: 8e-6, 32: 4e-7}, "H": {8: 1.3e-3, 16: 1.7e-5, 32: 1.3e-6}},
        5.0: {"n": {8: 2e-4, 16: 7e-6, 32: 4e-7}, "H": {8: 1.5e-3, 16: 1.8e-5, 32: 1.7e-6}},
        4.0: {"n": {8: 4e-4, 16: 7e-6, 32: 4e-7}, "H": {8: 1.6e-3, 16: 1.9e-5, 32: 1.9e-6}},
    },
    "blending": {
        "blend": {"n": {8: 2e-4, 16: 8e-6, 32: 4e-7}, "H": {8: 1.3e-3, 16: 1.7e-5, 32: 1.3e-6}},
        "noblend": {"n": {8: 3e-3, 16: 9e-5, 32: 3e-6}, "H": {8: 2e-2, 16: 2e-3, 32: 3e-4}},
    },
    "selfconv": {
        "shear": {
            "A": {8: 2e-2, 16: 2e-3, 32: 1e-4},
            "V": {8: 4e-2, 16: 1e-3, 32: 1e-4},
            "J": {8: 3e-2, 16: 2e-3, 32: 1e-4},
        },
        "poiseuille": {
            "A": {8: 2e-2, 16: 3e-3, 32: 2e-4},
            "V": {8: 4e-2, 16: 1e-3, 32: 1e-4},
            "J": {8: 2e-2, 16: 2e-3, 32: 1e-4},
        },
    },
    "fmm": {(32, 96): 6e-3, (64, 128): 4e-5, (96, 256): 5e-6},
    # ellipsoid (0.4, 1, 1); delta = C delta* for C in (0.5, 1, 2), then delta = C' h for C' in (0.5, 1, 2)
    "delta": {
        "0.5d*": {8: 2e-2, 16: 6e-3, 32: 3e-3, 64: 2e-4},
        "d*": {8: 7e-3, 16: 4e-4, 32: 2e-5, 64: 1e-6},
        "2d*": {8: 1e-2, 16: 1e-3, 32: 6e-5, 64: 6e-6},
        "0.5h": {8: 2e-2, 16: 6e-3, 32: 4e-3, 64: 7e-4},
        "h": {8: 7e-3, 16: 5e-4, 32: 1e-4, 64: 6e-5},
        "2h": {8: 1e-2, 16: 5e-3, 32: 1e-3, 64: 6e-4},
    },
}

QUAD_SHAPES = {"ellipsoid": lambda: Ellipsoid(0.6, 1.0, 1.0), "fourbump": lambda: FourBump()}
REFERENCE_NODES = {"ellipsoid": 48, "fourbump": 128}


@dataclass
class Table:
    """Errors per grid order with their target values."""

    name: str
    title: str
    columns: list
    rows: dict = field(default_factory=dict)  # m -> {column: value}
    targets: dict = field(default_factory=dict)  # column -> {m: value}
    notes: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    @property
    def digest(self):
        blob = json.dumps({"name": self.name, "params": self.params}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def value(self, m, col):
        return self.rows[m][col]

    def passed(self, m, col, tolerance=TOLERANCE):
        """``None`` when there is no target for the cell."""
        target = self.targets.get(col, {}).get(m)
        if target is None:
            return None
        return bool(self.rows[m][col] <= tolerance * target)

    def all_passed(self, tolerance=TOLERANCE):
        cells = [self.passed(m, c, tolerance) for m in self.rows for c in self.columns]
        return all(c for c in cells if c is not None)

    def order(self, col, m1, m2):
        """Observed convergence order between orders ``m1 < m2``."""
        e1, e2 = self.rows[m1][col], self.rows[m2][col]
        if e1 <= 0 or e2 <= 0:
            return float("nan")
        return math.log(e1 / e2) / math.log(m2 / m1)

    def render(self, tolerance=TOLERANCE):
        head = ["m"] + [f"{c:>9s} {'target':>8s}    " for c in self.columns]
        lines = [self.title, "  ".join(head)]
        for m in sorted(self.rows):
            cells = [f"{m:<3d}"]
            for c in self.columns:
                v = self.rows[m].get(c, float("nan"))
                t = self.targets.get(c, {}).get(m)
                ok = self.passed(m, c, tolerance)
                mark = {True: "ok", False: "FAIL", None: "--"}[ok]
                cells.append(f"{v:9.2e} {t if t is not None else float('nan'):8.1e} {mark:>4s}")
            lines.append("  ".join(cells))
        ms = sorted(self.rows)
        if len(ms) > 1:
            orders = ", ".join(f"{c} {self.order(c, ms[-2], ms[-1]):.2f}" for c in self.columns)
            lines.append(f"observed order m={ms[-2]}->{ms[-1]}: {orders}")
        lines += [f"note: {n}" for n in self.notes]
        lines.append(f"digest: {self.digest}")
        return "\n".join(lines)

    def as_dict(self):
        return {
            "name": self.name,
            "title": self.title,
            "digest": self.digest,
            "params": self.params,
            "rows": {str(m): r for m, r in self.rows.items()},
            "targets": {c: {str(m): v for m, v in t.items()} for c, t in self.targets.items()},
            "passed": {str(m): {c: self.passed(m, c) for c in self.columns} for m in self.rows},
            "notes": self.notes,
        }


def require_same_digest(a: Table, b: Table):
    """Refuse to compare tables produced from different parameters."""
    if a.digest != b.digest:
        raise ConfigurationError(f"digest mismatch: {a.name} {a.digest[:12]} vs {b.name} {b.digest[:12]}")


# ------------------------------------------------------------ references


def nested_reference(shape, m_list, n_quad, density=quadratic_field):
    """Single-layer reference values for every ``m`` in ``m_list``.

    Base nodes of order ``m`` are a subset of those of order ``M`` whenever
    ``m`` divides ``M``, so a single evaluation on the finest grid serves all
    orders that divide it.
    """
    m_list = sorted(set(m_list))
    top = m_list[-1]
    cache = {}
    for m in m_list:
        if top % m == 0:
            if top not in cache:
                _, X0 = initial_shape(shape, Grid(top))
                ref = single_layer_reference(shape, X0.reshape(-1, 3), density, n_theta=n_quad, n_phi=n_quad)
                cache[top] = ref.reshape(X0.shape)
            step = top // m
            idx = np.arange(1, m) * step - 1
            cache[m] = cache[top][:, idx][:, :, idx]
        else:
            _, X0 = initial_shape(shape, Grid(m))
            ref = single_layer_reference(shape, X0.reshape(-1, 3), density, n_theta=n_quad, n_phi=n_quad)
            cache[m] = ref.reshape(X0.shape)
    return cache


# ------------------------------------------------------------ suites


def quad_suite(m_list=(8, 16, 32), shape="ellipsoid", summation=None, references=None):
    """Singular quadrature, area and volume errors."""
    surf = QUAD_SHAPES[shape]()
    refs = references or nested_reference(surf, m_list, REFERENCE_NODES[shape])
    columns = ["S", "A", "V"] if isinstance(surf, Ellipsoid) else ["S"]
    table = Table("quad", f"single-layer quadrature on {shape} with 4x upsampling", columns,
                  targets=TARGETS["quad"][shape], params={"m": list(m_list), "shape": shape})
    for m in m_list:
        g = Grid(m)
        X, _ = initial_shape(surf, g)
        calc = OversetCalculus(g)
        geom = calc.geometry(X)
        S = SingleLayer(g, summation=summation)(X, quadratic_field(X), geom.W)
        row = {"S": relative_error(S, refs[m])}
        if "A" in columns:
            w = quadrature_weights(geom.W, calc.psi, g.h)
            row["A"] = abs(w.sum() - surf.area) / surf.area
            row["V"] = abs(volume(X, geom.normal, w) - surf.volume) / surf.volume
        table.rows[m] = row
    return table


def derivative_errors(surf, m, r0=DEFAULT_R0, blend=True):
    g = Grid(m)
    X, _ = initial_shape(surf, g)
    calc = OversetCalculus(g, r0)
    geom = calc.geometry(X, blend)
    ex = exact_geometry(surf, g)
    div = calc.surface_divergence(quadratic_field(X), geom, blend)
    return {
        "n": relative_error(geom.normal, ex["normal"]),
        "H": relative_error(geom.H, ex["H"]),
        "K": relative_error(geom.K, ex["K"]),
        "div": relative_error(div, quadratic_divergence(ex["x"], ex["normal"])),
    }


def deriv_suite(m_list=(8, 16, 32, 64), shape="ellipsoid"):
    """Normal, mean and Gaussian curvature, and surface divergence errors."""
    surf = QUAD_SHAPES[shape]()
    table = Table("deriv", f"surface derivatives on {shape}", ["n", "H", "K", "div"],
                  targets=TARGETS["deriv"][shape], params={"m": list(m_list), "shape": shape})
    for m in m_list:
        table.rows[m] = derivative_errors(surf, m)
    return table


def r0_suite(m_list=(8, 16, 32)):
    """Unit-sphere derivative errors for several partition radii, then without blending."""
    tables = []
    for key, targets in TARGETS["r0"].items():
        t = Table("r0", f"unit sphere, r0 = {key}/12 pi", ["n", "H"], targets=targets,
                  params={"m": list(m_list), "r0_twelfths": key})
        for m in m_list:
            e = derivative_errors(Sphere(), m, key * np.pi / 12)
            t.rows[m] = {"n": e["n"], "H": e["H"]}
        tables.append(t)
    for key, targets in TARGETS["blending"].items():
        blend = key == "blend"
        t = Table("r0", f"unit sphere, r0 = 5/12 pi, {'with' if blend else 'without'} blending", ["n", "H"],
                  targets=targets, params={"m": list(m_list), "blend": blend})
        for m in m_list:
            e = derivative_errors(Sphere(), m, blend=blend)
            t.rows[m] = {"n": e["n"], "H": e["H"]}
        tables.append(t)
    return tables


def capsule_run(flow, m, T=0.5, tol=1e-6, params=None, shape=None):
    """Final-state diagnostics of the self-convergence setup on one grid."""
    g = Grid(m)
    X, _ = initial_shape(shape or Ellipsoid(0.9, 1.0, 1.0), g)
    model = CapsuleModel(g, X, params or MembraneParams(2.0, 20.0, 1.0), flow)
    traj = simulate(model, X, T, tol)
    d = model.diagnostics(traj.t, traj.y)
    return d, traj, model


def selfconv_suite(m_list=(8, 16, 32), flows=("shear", "poiseuille"), T=0.5, tol=1e-6, runs=None):
    """Area, volume and second-moment errors of the final shape against the finest grid."""
    specs = {"shear": FlowSpec("shear", 1.0), "poiseuille": FlowSpec("poiseuille", 1.0, 5.0)}
    m_list = sorted(m_list)
    ref_m = m_list[-1]
    tables = []
    for name in flows:
        finals = {}
        for m in m_list:
            if runs is not None and (name, m) in runs:
                finals[m] = runs[(name, m)]
            else:
                finals[m] = capsule_run(specs[name], m, T, tol)[0]
        ref = finals[ref_m]
        t = Table("selfconv", f"capsule self-convergence, {name} flow, T={T}, reference m={ref_m}",
                  ["A", "V", "J"], targets=TARGETS["selfconv"][name],
                  params={"m": m_list, "flow": name, "T": T, "tol": tol})
        for m in m_list[:-1]:
            d = finals[m]
            t.rows[m] = {
                "A": abs(d.area - ref.area) / ref.area,
                "V": abs(d.volume - ref.volume) / ref.volume,
                "J": float(np.abs(d.J - ref.J).max() / np.abs(ref.J).max()),
            }
        t.notes.append(f"reference A={ref.area:.10g} V={ref.volume:.10g}")
        tables.append(t)
    return tables


def fmm_suite(cases=((32, 96), (64, 128)), k=100):
    """FMM against direct summation of the same regularized sum on ellipsoid(0.6, 1, 1)."""
    surf = QUAD_SHAPES["ellipsoid"]()
    table = Table("fmm", f"single-level FMM vs direct summation, k={k}", ["err", "direct_s", "fmm_s"],
                  params={"cases": [list(c) for c in cases], "k": k})
    for m, n_eq in cases:
        g = Grid(m)
        X, _ = initial_shape(surf, g)
        geom = OversetCalculus(g).geometry(X)
        f = quadratic_field(X)
        t0 = time.perf_counter()
        direct = SingleLayer(g)(X, f, geom.W)
        t1 = time.perf_counter()
        fmm = SingleLayer(g, summation=FMMSummation(k=k, n_eq=n_eq))(X, f, geom.W)
        t2 = time.perf_counter()
        table.rows[m] = {"err": relative_error(fmm, direct), "direct_s": t1 - t0, "fmm_s": t2 - t1}
        table.targets.setdefault("err", {})[m] = TARGETS["fmm"].get((m, n_eq))
        table.notes.append(f"m={m}: N_eq={n_eq}, speedup {(t1 - t0) / (t2 - t1):.2f}")
    return table


def delta_suite(m_list=(8, 16, 32, 64), references=None):
    """Regularization length sensitivity on ellipsoid(0.4, 1, 1)."""
    surf = Ellipsoid(0.4, 1.0, 1.0)
    refs = references or nested_reference(surf, m_list, 64)
    cols = list(TARGETS["delta"])
    table = Table("delta", "regularization length sensitivity on ellipsoid(0.4,1,1)", cols,
                  targets=TARGETS["delta"], params={"m": list(m_list)},
                  notes=["d* = neighbour-distance rule per patch, h = pi/m (base grid spacing)"])
    for m in m_list:
        g = Grid(m)
        X, _ = initial_shape(surf, g)
        geom = OversetCalculus(g).geometry(X)
        layer = SingleLayer(g)
        f = quadratic_field(X)
        row = {}
        for C, col in zip((0.5, 1.0, 2.0), cols[:3]):
            row[col] = relative_error(layer(X, f, geom.W, C=C), refs[m])
        for Cp, col in zip((0.5, 1.0, 2.0), cols[3:]):
            row[col] = relative_error(layer(X, f, geom.W, delta=Cp * g.h), refs[m])
        table.rows[m] = row
    return table


def run_suite(name, m_list=None):
    """List of tables for suite ``name``."""
    if name not in SUITES:
        raise ConfigurationError(f"unknown suite {name!r}; choose from {SUITES}")
    kw = {} if m_list is None else {"m_list": tuple(m_list)}
    if name == "quad":
        return [quad_suite(**kw), quad_suite(shape="fourbump", **kw)]
    if name == "deriv":
        return [deriv_suite(**kw), deriv_suite(shape="fourbump", **kw)]
    if name == "r0":
        return r0_suite(**kw)
    if name == "selfconv":
        return selfconv_suite(**kw)
    if name == "delta":
        return [delta_suite(**kw)]
    cases = ((32, 96), (64, 128)) if m_list is None else tuple(
        (m, {32: 96, 64: 128, 96: 256}.get(m, 96)) for m in m_list
    )
    return [fmm_suite(cases)]
