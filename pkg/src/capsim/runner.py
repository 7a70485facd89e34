"""Turn a :class:`RunConfig` into a model and drive a full simulation with output."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .atlas import Grid
from .config import RunConfig
from .dynamics import CapsuleModel, FlowSpec, simulate
from .errors import (
    DegenerateDeformationError,
    DegenerateGeometryError,
    OrientationError,
    StepSizeUnderflow,
)
from .fmm import FMMSummation
from .io import Snapshot, write_json, write_series, write_snapshot
from .membrane import MembraneParams
from .shapes import Ellipsoid, FourBump, Sphere, initial_shape

log = logging.getLogger("capsim")

SOLVER_ERRORS = (DegenerateGeometryError, DegenerateDeformationError, OrientationError, StepSizeUnderflow)


def build_shape(spec: dict):
    kind = spec["kind"]
    if kind == "sphere":
        return Sphere(spec.get("a", 1.0))
    if kind == "ellipsoid":
        return Ellipsoid(spec["a"], spec["b"], spec["c"])
    if kind == "fourbump":
        return FourBump(spec["amplitude"])
    raise ValueError(f"unknown shape kind {kind!r}")


def build_model(cfg: RunConfig):
    """``(model, X_initial)``; the initial shape is also the stress-free reference."""
    g = cfg.grid
    grid = Grid(g["m"], g["upsample"])
    X, _ = initial_shape(build_shape(cfg.shape), grid)
    f = cfg.flow
    flow = FlowSpec(f["kind"], f["rate"], f["R0"], f["t_off"])
    params = MembraneParams(**cfg.membrane)
    summation = None
    if cfg.fmm["enabled"]:
        summation = FMMSummation(k=cfg.fmm["k"], n_eq=cfg.fmm["n_eq"], seed=cfg.fmm["seed"])
    model = CapsuleModel(grid, X, params, flow, r0=g["r0"], C=g["C"], summation=summation)
    return model, X


@dataclass
class RunResult:
    directory: Path
    t: float
    X: np.ndarray
    series: list
    steps: list
    report: dict


def _snapshot_fields(model, X):
    geom = model.geometry(X)
    return {"H": geom.H, "K": geom.K, "force": model.force(X, geom)}


def run(cfg: RunConfig) -> RunResult:
    """Simulate ``cfg`` and write snapshots, series and a final report.

    On a solver error the last accepted state is written to ``failure.npz``
    together with ``report.json`` and the error is re-raised.
    """
    out = Path(cfg.output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest
    model, X0 = build_model(cfg)
    formats = cfg.output["formats"]
    cadence = cfg.output["cadence"]
    series, steps = [], []
    state = {"t": 0.0, "X": X0, "count": 0}
    started = time.perf_counter()

    def snapshot(t, X, name):
        snap = Snapshot(t, X, digest, _snapshot_fields(model, X), {"config": cfg.as_dict()})
        for fmt in formats:
            suffix = {"native": ".npz", "vtk": ".vtk", "csv": ".csv"}[fmt]
            write_snapshot(snap, out / f"{name}{suffix}", fmt)

    def observe(t, X, rec=None):
        d = model.diagnostics(t, X)
        row = d.record()
        row.update(dt=rec.dt if rec else 0.0, err=rec.err if rec else 0.0)
        series.append(row)
        log.info("t=%.6g dt=%.3g A=%.8g V=%.8g Da=%.6g grad=%.4g", t, row["dt"], d.area, d.volume, d.Da, d.grad_phi)

    def callback(t, y, rec):
        state.update(t=t, X=y, count=state["count"] + 1)
        steps.append({"t": t, "dt": rec.dt, "accepted": 1, "err": rec.err})
        observe(t, y, rec)
        if state["count"] % cadence == 0:
            snapshot(t, y, f"snap_{state['count']:06d}")

    observe(0.0, X0)
    snapshot(0.0, X0, "snap_000000")
    report = {"digest": digest, "config": cfg.as_dict(), "status": "ok"}
    try:
        traj = simulate(model, X0, cfg.stepper["T"], cfg.stepper["tol"], callback, cfg.stepper["dt0"])
    except SOLVER_ERRORS as exc:
        report.update(status="solver-error", error=f"{type(exc).__name__}: {exc}", t=state["t"],
                      accepted_steps=state["count"])
        write_snapshot(Snapshot(state["t"], state["X"], digest, {}, {"error": str(exc)}), out / "failure.npz")
        if series:
            write_series(out / "diagnostics.csv", series, digest)
        write_json(out / "report.json", report)
        raise
    steps.extend({"t": r.t, "dt": r.dt, "accepted": 0, "err": r.err} for r in traj.log if not r.accepted)
    snapshot(traj.t, traj.y, "final")
    write_series(out / "diagnostics.csv", series, digest)
    write_series(out / "steps.csv", sorted(steps, key=lambda r: (r["t"], -r["accepted"])), digest)
    final = series[-1]
    peak = max(series, key=lambda r: r["Da"])
    report.update(
        t=traj.t,
        accepted_steps=traj.accepted,
        rejected_steps=traj.rejected,
        velocity_evaluations=model.evaluations,
        wall_seconds=time.perf_counter() - started,
        final={k: final[k] for k in ("area", "volume", "Da", "grad_phi")},
        Da_peak={"t": peak["t"], "Da": peak["Da"]},
        volume_drift=abs(final["volume"] - series[0]["volume"]) / series[0]["volume"],
        max_displacement=float(np.linalg.norm(traj.y - X0, axis=-1).max()),
    )
    if not math.isfinite(report["final"]["area"]):
        report["status"] = "non-finite"
    write_json(out / "report.json", report)
    return RunResult(out, traj.t, traj.y, series, steps, report)
