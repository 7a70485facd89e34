"""Command line entry point: ``capsim simulate | converge | inspect``.

Exit codes: 0 success, 1 solver error, 2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="capsim", description="Boundary-integral capsule simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log every accepted step")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a simulation described by an INI file")
    sim.add_argument("config", type=Path)

    conv = sub.add_parser("converge", help="run a convergence suite and print its tables")
    conv.add_argument("suite", choices=["quad", "deriv", "selfconv", "fmm", "delta", "r0"])
    conv.add_argument("--m-list", type=int, nargs="+", metavar="M", help="grid orders (default per suite)")
    conv.add_argument("--json", type=Path, help="also write the tables as JSON")

    ins = sub.add_parser("inspect", help="summarize a native snapshot")
    ins.add_argument("snapshot", type=Path)
    return p


def _simulate(args):
    from .config import load_config
    from .runner import SOLVER_ERRORS, run

    cfg = load_config(args.config)
    try:
        result = run(cfg)
    except SOLVER_ERRORS as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        print(f"last valid state written to {Path(cfg.output['directory']) / 'failure.npz'}", file=sys.stderr)
        return EXIT_SOLVER
    r = result.report
    print(f"finished t={r['t']:.6g} in {r['accepted_steps']} steps ({r['rejected_steps']} rejected)")
    print(f"final area={r['final']['area']:.10g} volume={r['final']['volume']:.10g} Da={r['final']['Da']:.6g}")
    print(f"output: {result.directory}")
    return EXIT_OK


def _converge(args):
    from .harness import run_suite
    from .io import write_json

    tables = run_suite(args.suite, args.m_list)
    for t in tables:
        print(t.render())
        print()
    if args.json:
        write_json(args.json, [t.as_dict() for t in tables])
    return EXIT_OK


def _inspect(args):
    from .io import read_snapshot

    snap = read_snapshot(args.snapshot)
    X = snap.X
    print(f"t = {snap.t!r}")
    print(f"m = {snap.m}, nodes = {X.shape[0] * X.shape[1] * X.shape[2]}")
    print(f"digest = {snap.digest}")
    lo, hi = X.reshape(-1, 3).min(axis=0), X.reshape(-1, 3).max(axis=0)
    print(f"bounding box = {np.round(lo, 6).tolist()} .. {np.round(hi, 6).tolist()}")
    for name, val in sorted(snap.fields.items()):
        val = np.asarray(val)
        mag = np.linalg.norm(val, axis=-1) if val.ndim == 4 else np.abs(val)
        print(f"field {name}: shape {val.shape}, max |.| = {mag.max():.6g}")
    if snap.meta:
        print("meta keys:", ", ".join(sorted(snap.meta)))
        if "config" in snap.meta:
            print(json.dumps(snap.meta["config"], sort_keys=True))
    return EXIT_OK


def main(argv=None):
    from .errors import ConfigurationError, SnapshotError
    from .kernels import configure_threads

    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        configure_threads()
    except ValueError as exc:
        print(f"configuration error: CAPSIM_NUM_THREADS: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    handler = {"simulate": _simulate, "converge": _converge, "inspect": _inspect}[args.command]
    try:
        return handler(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SnapshotError as exc:
        print(f"snapshot error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
