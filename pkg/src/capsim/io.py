"""Snapshot and series output.

Three formats are supported.  ``native`` is a compressed ``.npz`` archive
with a JSON header and reloads bit-exactly.  ``vtk`` writes one legacy ASCII
structured-grid file per patch.  ``csv`` writes one row per node.  Every file
is written to a temporary name first and then renamed into place.
"""
from __future__ import annotations

import csv
import json
import os
import tempfile
import zipfile
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atlas import N_PATCHES
from .errors import SnapshotError

FORMAT_VERSION = 1
FORMATS = ("native", "vtk", "csv")


@dataclass
class Snapshot:
    """Surface nodes at one instant plus optional per-node fields.

    ``fields`` maps names to arrays of shape ``(6, n, n)`` or ``(6, n, n, 3)``.
    """

    t: float
    X: np.ndarray
    digest: str = ""
    fields: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.X.shape[1] + 1

    def __post_init__(self):
        self.X = np.asarray(self.X, float)
        n = self.X.shape[1] if self.X.ndim == 4 else -1
        if self.X.shape != (N_PATCHES, n, n, 3):
            raise SnapshotError(f"node array has shape {self.X.shape}, expected (6, n, n, 3)")
        for name, val in self.fields.items():
            if np.shape(val)[:3] != self.X.shape[:3]:
                raise SnapshotError(f"field {name!r} does not match the grid")


@contextmanager
def atomic_open(path, mode="w", **kwargs):
    """Open a temporary sibling of ``path`` and rename it over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        with open(tmp, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_snapshot(snap: Snapshot, path, format="native"):
    """Write ``snap``; returns the list of files produced."""
    if format not in FORMATS:
        raise ValueError(f"unknown snapshot format {format!r}; choose from {FORMATS}")
    path = Path(path)
    if format == "native":
        return [_write_native(snap, path)]
    if format == "vtk":
        return _write_vtk(snap, path)
    return [_write_csv(snap, path)]


def _header(snap):
    return {
        "version": FORMAT_VERSION,
        "t": float(snap.t).hex(),
        "m": snap.m,
        "patches": N_PATCHES,
        "digest": snap.digest,
        "fields": sorted(snap.fields),
        "meta": snap.meta,
    }


def _write_native(snap, path):
    arrays = {"X": snap.X}
    arrays.update({f"field_{k}": np.asarray(v) for k, v in snap.fields.items()})
    arrays["header"] = np.frombuffer(json.dumps(_header(snap)).encode(), dtype=np.uint8)
    with atomic_open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)
    return path


def read_snapshot(path) -> Snapshot:
    """Load a native snapshot.

    Raises
    ------
    SnapshotError
        On a missing, truncated or corrupt file, or a format version mismatch.
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(bytes(data["header"]).decode())
            if header.get("version") != FORMAT_VERSION:
                raise SnapshotError(
                    f"{path}: format version {header.get('version')} (expected {FORMAT_VERSION})"
                )
            X = data["X"]
            fields = {k: data[f"field_{k}"] for k in header["fields"]}
    except SnapshotError:
        raise
    except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile) as exc:
        raise SnapshotError(f"{path}: unreadable snapshot ({exc})") from exc
    snap = Snapshot(float.fromhex(header["t"]), X, header["digest"], fields, header.get("meta", {}))
    if snap.m != header["m"]:
        raise SnapshotError(f"{path}: header says m={header['m']} but nodes give m={snap.m}")
    return snap


def _fmt(x):
    return repr(float(x))


def _write_vtk(snap, path):
    stem = path.with_suffix("") if path.suffix == ".vtk" else path
    n = snap.X.shape[1]
    written = []
    for i in range(N_PATCHES):
        out = stem.parent / f"{stem.name}_patch{i}.vtk"
        with atomic_open(out) as fh:
            fh.write("# vtk DataFile Version 3.0\n")
            fh.write(f"capsule patch {i} t={snap.t!r} digest={snap.digest}\n")
            fh.write("ASCII\nDATASET STRUCTURED_GRID\n")
            fh.write(f"DIMENSIONS {n} {n} 1\nPOINTS {n * n} double\n")
            # VTK wants the first index fastest
            pts = snap.X[i].transpose(1, 0, 2).reshape(-1, 3)
            fh.writelines(" ".join(map(_fmt, p)) + "\n" for p in pts)
            if snap.fields:
                fh.write(f"POINT_DATA {n * n}\n")
            for name, val in sorted(snap.fields.items()):
                val = np.asarray(val, float)[i]
                if val.ndim == 3:
                    fh.write(f"VECTORS {name} double\n")
                    fh.writelines(" ".join(map(_fmt, p)) + "\n" for p in val.transpose(1, 0, 2).reshape(-1, 3))
                else:
                    fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    fh.writelines(_fmt(p) + "\n" for p in val.T.reshape(-1))
        written.append(out)
    return written


def _write_csv(snap, path):
    n = snap.X.shape[1]
    names = sorted(snap.fields)
    cols = ["patch", "j", "k", "x", "y", "z"]
    for name in names:
        val = np.asarray(snap.fields[name])
        cols += [f"{name}_{c}" for c in "xyz"] if val.ndim == 4 else [name]
    with atomic_open(path, newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(N_PATCHES):
            for j in range(n):
                for k in range(n):
                    row = [i, j + 1, k + 1, *map(_fmt, snap.X[i, j, k])]
                    for name in names:
                        v = np.atleast_1d(np.asarray(snap.fields[name])[i, j, k])
                        row += list(map(_fmt, v))
                    w.writerow(row)
    return path


def write_series(path, records, digest=""):
    """Write a list of flat dicts as CSV, preceded by a ``# digest`` comment line."""
    records = list(records)
    if not records:
        raise ValueError("no records to write")
    keys = list(records[0])
    with atomic_open(path, newline="") as fh:
        fh.write(f"# digest={digest}\n")
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in records:
            w.writerow({k: _fmt(v) if isinstance(v, (float, np.floating)) else v for k, v in r.items()})
    return Path(path)


def read_series(path):
    """Inverse of :func:`write_series`; returns ``(digest, records)``."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith("# digest="):
            raise SnapshotError(f"{path}: missing digest line")
        digest = first.strip()[len("# digest="):]
        rows = [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]
    return digest, rows


def _parse(v):
    try:
        return float(v)
    except ValueError:
        return v


def write_json(path, obj):
    with atomic_open(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return Path(path)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
