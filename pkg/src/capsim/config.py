"""Run configuration read from INI files.

Example::

    [shape]
    kind = ellipsoid        ; sphere | ellipsoid | fourbump
    a = 0.9                 ; semi-axes (length)
    b = 1.0
    c = 1.0

    [membrane]
    Es = 2.0                ; shear modulus (force / length)
    ED = 20.0               ; dilatation modulus (force / length)
    mu = 1.0                ; viscosity (force time / length^2)

    [flow]
    kind = shear            ; none | shear | poiseuille
    rate = 1.0              ; shear rate (1/time) or poiseuille alpha (1/(length time))
    R0 = 5.0                ; poiseuille radius (length)
    t_off =                 ; switch the flow off at this time (optional)

    [grid]
    m = 16                  ; patch order, (m-1)^2 nodes per patch
    upsample = 4            ; quadrature upsampling factor, 1, 2 or 4
    r0 = 1.3089969          ; partition-of-unity radius (radians)
    C = 1.0                 ; regularization constant

    [stepper]
    tol = 1e-6              ; RKF45 relative tolerance
    T = 0.5                 ; final time
    dt0 =                   ; initial step (optional)

    [fmm]
    enabled = no
    k = 100
    n_eq = 96
    seed = 0

    [output]
    directory = run
    cadence = 10            ; snapshot every this many accepted steps
    formats = native        ; comma list of native, vtk, csv
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from io import StringIO
from pathlib import Path

from .atlas import DEFAULT_R0
from .dynamics import FLOW_KINDS
from .errors import ConfigurationError
from .io import FORMATS

SHAPE_KINDS = ("sphere", "ellipsoid", "fourbump")
UPSAMPLE_FACTORS = (1, 2, 4)


@dataclass
class RunConfig:
    shape: dict = field(default_factory=lambda: {"kind": "sphere", "a": 1.0, "b": 1.0, "c": 1.0, "amplitude": 3.0})
    membrane: dict = field(default_factory=lambda: {"Es": 2.0, "ED": 20.0, "mu": 1.0})
    flow: dict = field(default_factory=lambda: {"kind": "none", "rate": 1.0, "R0": 5.0, "t_off": None})
    grid: dict = field(default_factory=lambda: {"m": 16, "upsample": 4, "r0": DEFAULT_R0, "C": 1.0})
    stepper: dict = field(default_factory=lambda: {"tol": 1e-6, "T": 1.0, "dt0": None})
    fmm: dict = field(default_factory=lambda: {"enabled": False, "k": 100, "n_eq": 96, "seed": 0})
    output: dict = field(default_factory=lambda: {"directory": "run", "cadence": 10, "formats": ["native"]})

    def as_dict(self):
        return asdict(self)

    @property
    def digest(self):
        """sha256 of everything that affects the computed results (not ``output``)."""
        d = self.as_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


_TYPES = {
    "shape": {"kind": str, "a": float, "b": float, "c": float, "amplitude": float},
    "membrane": {"Es": float, "ED": float, "mu": float},
    "flow": {"kind": str, "rate": float, "R0": float, "t_off": float},
    "grid": {"m": int, "upsample": int, "r0": float, "C": float},
    "stepper": {"tol": float, "T": float, "dt0": float},
    "fmm": {"enabled": bool, "k": int, "n_eq": int, "seed": int},
    "output": {"directory": str, "cadence": int, "formats": list},
}
_OPTIONAL = {("flow", "t_off"), ("stepper", "dt0")}


def _convert(parser, section, key, kind):
    raw = parser.get(section, key).strip()
    if raw == "" and (section, key) in _OPTIONAL:
        return None
    if kind is bool:
        return parser.getboolean(section, key)
    if kind is list:
        return [s.strip() for s in raw.split(",") if s.strip()]
    if kind is int:
        value = float(raw)
        if value != int(value):
            raise ValueError(f"{raw!r} is not an integer")
        return int(value)
    return kind(raw)


def parse_config(text, base=None) -> RunConfig:
    """Parse INI text; every problem found is reported in one error."""
    cfg = RunConfig()
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    problems = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unparseable configuration: {exc}", [str(exc)]) from exc
    for section in parser.sections():
        if section not in _TYPES:
            problems.append(f"unknown section [{section}]")
            continue
        target = getattr(cfg, section)
        for key in parser.options(section):
            if key not in _TYPES[section]:
                problems.append(f"unknown key {section}.{key}")
                continue
            try:
                target[key] = _convert(parser, section, key, _TYPES[section][key])
            except ValueError as exc:
                problems.append(f"{section}.{key}: {exc}")
    if base is not None and not Path(cfg.output["directory"]).is_absolute():
        cfg.output["directory"] = str(Path(base) / cfg.output["directory"])
    problems += validate(cfg)
    if problems:
        raise ConfigurationError("invalid configuration:\n  " + "\n  ".join(problems), problems)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}", [str(exc)]) from exc
    return parse_config(text, base=path.parent)


def validate(cfg: RunConfig):
    """List of violated constraints (empty when valid)."""
    p = []

    def positive(section, key):
        v = getattr(cfg, section)[key]
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            p.append(f"{section}.{key} must be positive, got {v!r}")

    s = cfg.shape
    if s["kind"] not in SHAPE_KINDS:
        p.append(f"shape.kind must be one of {SHAPE_KINDS}, got {s['kind']!r}")
    for key in ("a", "b", "c", "amplitude"):
        positive("shape", key)
    for key in ("Es", "mu"):
        positive("membrane", key)
    if not cfg.membrane["ED"] >= 0:
        p.append("membrane.ED must be non-negative")
    f = cfg.flow
    if f["kind"] not in FLOW_KINDS:
        p.append(f"flow.kind must be one of {FLOW_KINDS}, got {f['kind']!r}")
    if f["kind"] != "none":
        positive("flow", "rate")
    if f["kind"] == "poiseuille":
        positive("flow", "R0")
    if f["t_off"] is not None and not f["t_off"] >= 0:
        p.append("flow.t_off must be non-negative")
    g = cfg.grid
    if not (isinstance(g["m"], int) and g["m"] >= 8):
        p.append(f"grid.m must be an integer >= 8, got {g['m']!r}")
    if g["upsample"] not in UPSAMPLE_FACTORS:
        p.append(f"grid.upsample must be one of {UPSAMPLE_FACTORS}, got {g['upsample']!r}")
    if not 3 * math.pi / 12 < g["r0"] < math.pi / 2:
        p.append(f"grid.r0 must lie in (pi/4, pi/2), got {g['r0']!r}")
    positive("grid", "C")
    positive("stepper", "tol")
    positive("stepper", "T")
    if cfg.stepper["dt0"] is not None:
        positive("stepper", "dt0")
    if cfg.fmm["enabled"]:
        if cfg.fmm["k"] < 1:
            p.append("fmm.k must be at least 1")
        if cfg.fmm["n_eq"] < 26:
            p.append("fmm.n_eq must be at least 26")
    if cfg.output["cadence"] < 1:
        p.append("output.cadence must be at least 1")
    bad = [x for x in cfg.output["formats"] if x not in FORMATS]
    if bad:
        p.append(f"output.formats has unknown entries {bad}; choose from {FORMATS}")
    return p


def dump_config(cfg: RunConfig) -> str:
    """INI text that parses back to ``cfg``."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for section, values in cfg.as_dict().items():
        parser[section] = {
            k: "" if v is None else ", ".join(v) if isinstance(v, list) else
            ("yes" if v else "no") if isinstance(v, bool) else repr(v) if isinstance(v, float) else str(v)
            for k, v in values.items()
        }
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()
