import json

import numpy as np
import pytest

from capsim.cli import EXIT_CONFIG, EXIT_OK, main
from capsim.io import Snapshot, read_series, read_snapshot, write_snapshot

CONFIG = """
[shape]
kind = ellipsoid
a = 0.9
[flow]
kind = shear
[grid]
m = 8
[stepper]
T = 0.05
tol = 1e-5
[output]
directory = out
cadence = 2
formats = native, vtk
"""


def test_simulate_writes_outputs(tmp_path, capsys):
    (tmp_path / "run.ini").write_text(CONFIG)
    assert main(["simulate", str(tmp_path / "run.ini")]) == EXIT_OK
    out = tmp_path / "out"
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "ok" and report["t"] == 0.05
    digest, rows = read_series(out / "diagnostics.csv")
    assert digest == report["digest"] and rows[-1]["t"] == 0.05
    final = read_snapshot(out / "final.npz")
    assert final.t == 0.05 and {"H", "K", "force"} <= set(final.fields)
    assert (out / "final_patch5.vtk").exists()
    assert "finished" in capsys.readouterr().out


def test_inspect(tmp_path, capsys):
    write_snapshot(Snapshot(0.5, np.ones((6, 7, 7, 3)), "d"), tmp_path / "s.npz")
    assert main(["inspect", str(tmp_path / "s.npz")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "m = 8" in out and "digest = d" in out


def test_bad_config_exit_code(tmp_path, capsys):
    (tmp_path / "bad.ini").write_text("[grid]\nm = 2\n")
    assert main(["simulate", str(tmp_path / "bad.ini")]) == EXIT_CONFIG
    assert "grid.m" in capsys.readouterr().err


def test_bad_snapshot_exit_code(tmp_path):
    (tmp_path / "junk.npz").write_bytes(b"junk")
    assert main(["inspect", str(tmp_path / "junk.npz")]) == EXIT_CONFIG


def test_bad_thread_setting(tmp_path, monkeypatch):
    monkeypatch.setenv("CAPSIM_NUM_THREADS", "many")
    assert main(["inspect", str(tmp_path / "x.npz")]) == EXIT_CONFIG


def test_usage_error():
    with pytest.raises(SystemExit) as info:
        main(["converge", "nope"])
    assert info.value.code == 2


def test_converge_fmm_small(tmp_path, capsys):
    assert main(["converge", "r0", "--m-list", "8", "--json", str(tmp_path / "t.json")]) == EXIT_OK
    tables = json.loads((tmp_path / "t.json").read_text())
    assert tables and "digest" in tables[0]
    assert "digest:" in capsys.readouterr().out
