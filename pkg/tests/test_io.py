import numpy as np
import pytest

from capsim.errors import SnapshotError
from capsim.io import FORMAT_VERSION, Snapshot, read_series, read_snapshot, write_series, write_snapshot


@pytest.fixture
def snap(rng):
    X = rng.normal(size=(6, 7, 7, 3))
    return Snapshot(1 / 3, X, "abc", {"H": rng.normal(size=(6, 7, 7)), "f": rng.normal(size=(6, 7, 7, 3))},
                    {"note": "x"})


def test_native_round_trip_is_bit_exact(snap, tmp_path):
    (path,) = write_snapshot(snap, tmp_path / "s.npz")
    back = read_snapshot(path)
    assert back.t == snap.t and back.digest == "abc" and back.m == 8
    np.testing.assert_array_equal(back.X, snap.X)
    np.testing.assert_array_equal(back.fields["f"], snap.fields["f"])
    assert back.meta == {"note": "x"}


def test_vtk_writes_one_file_per_patch(snap, tmp_path):
    files = write_snapshot(snap, tmp_path / "s.vtk", "vtk")
    assert len(files) == 6
    text = files[0].read_text()
    assert "DIMENSIONS 7 7 1" in text and "POINTS 49 double" in text
    assert "VECTORS f double" in text and "SCALARS H double 1" in text


def test_csv_has_a_row_per_node(snap, tmp_path):
    (path,) = write_snapshot(snap, tmp_path / "s.csv", "csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + 6 * 49
    assert lines[0].split(",")[:6] == ["patch", "j", "k", "x", "y", "z"]
    first = lines[1].split(",")
    assert float(first[3]) == snap.X[0, 0, 0, 0]


def test_version_mismatch(snap, tmp_path, monkeypatch):
    import capsim.io as io

    monkeypatch.setattr(io, "FORMAT_VERSION", FORMAT_VERSION + 1)
    write_snapshot(snap, tmp_path / "s.npz")
    monkeypatch.undo()
    with pytest.raises(SnapshotError, match="version"):
        read_snapshot(tmp_path / "s.npz")


def test_truncated_file(snap, tmp_path):
    (path,) = write_snapshot(snap, tmp_path / "s.npz")
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(SnapshotError):
        read_snapshot(path)
    with pytest.raises(SnapshotError):
        read_snapshot(tmp_path / "missing.npz")


def test_bad_shapes():
    with pytest.raises(SnapshotError):
        Snapshot(0.0, np.zeros((5, 7, 7, 3)))
    with pytest.raises(SnapshotError):
        Snapshot(0.0, np.zeros((6, 7, 7, 3)), fields={"H": np.zeros((6, 6, 7))})


def test_no_partial_file_on_failure(snap, tmp_path, monkeypatch):
    def broken(fh, **arrays):
        fh.write(b"partial")
        raise OSError("disk full")

    monkeypatch.setattr(np, "savez_compressed", broken)
    with pytest.raises(OSError):
        write_snapshot(snap, tmp_path / "s.npz")
    assert list(tmp_path.iterdir()) == []


def test_series_round_trip(tmp_path):
    rows = [{"t": 0.1, "area": 12.5, "status": "ok"}, {"t": 0.2, "area": 12.25, "status": "ok"}]
    write_series(tmp_path / "d.csv", rows, "dig")
    digest, back = read_series(tmp_path / "d.csv")
    assert digest == "dig" and back == rows
