import numpy as np
import pandas as pd

from touchdown_lab import __version__
from touchdown_lab.model import ModelParams, RadialGrid, initial_profile
from touchdown_lab.outputs import (
    SnapshotWriter,
    load_snapshots,
    read_csv,
    read_json,
    snapshot_frame,
    write_csv,
    write_json,
)


def test_csv_starts_with_provenance_header(tmp_path):
    path = write_csv(pd.DataFrame({"a": [0.1, 1.0 / 3.0]}), tmp_path / "sub" / "t.csv", "abc123")
    first = path.read_text(encoding="utf-8").splitlines()[0]
    assert first == f"# touchdown_lab {__version__} config_hash=abc123"
    frame = read_csv(path)
    assert frame["a"].iloc[1] == 1.0 / 3.0


def test_json_carries_hash_and_version(tmp_path):
    path = write_json({"x": np.float64(1.5), "k": np.int64(3), "ok": np.bool_(True), "v": np.arange(2)},
                      tmp_path / "s.json", "abc123")
    data = read_json(path)
    assert data == {"x": 1.5, "k": 3, "ok": True, "v": [0, 1], "config_hash": "abc123",
                    "version": __version__}


def test_snapshot_frame_columns():
    params = ModelParams()
    state = initial_profile(RadialGrid(20), params.epsilon)
    frame = snapshot_frame(state, params)
    assert list(frame.columns) == ["r", "u", "v", "mu"]
    assert len(frame) == 21


def test_snapshots_load_in_time_order(tmp_path):
    params = ModelParams()
    writer = SnapshotWriter(tmp_path, params, "h")
    base = initial_profile(RadialGrid(20), params.epsilon)
    for t in (2.0, 1.0):
        writer(type(base)(time=t, values=base.values * t / 2.0))
    writer.write_manifest({"note": "two"})
    assert (tmp_path / "snapshots" / "snapshot_0001.csv").exists()
    states = load_snapshots(tmp_path)
    assert [s.time for s in states] == [1.0, 2.0]
    np.testing.assert_array_equal(states[0].values, base.values / 2.0)
    assert read_json(tmp_path / "manifest.json")["note"] == "two"


def test_csv_floats_read_back_exactly(tmp_path):
    values = np.array([0.1 + 0.2, 1.0 / 3.0, 2.0 / 3.0, np.pi * 1e-13, 1e12 + 0.1, -7.000000000000001e-300])
    path = write_csv(pd.DataFrame({"x": values}), tmp_path / "exact.csv", "h")
    np.testing.assert_array_equal(read_csv(path)["x"].to_numpy(), values)
