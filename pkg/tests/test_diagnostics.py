import numpy as np
import pandas as pd
import pytest

from touchdown_lab.diagnostics import (
    DIAGNOSTIC_COLUMNS,
    DiagnosticsSeries,
    NoInteriorMinimum,
    energy,
    mass,
    track_extrema,
)
from touchdown_lab.model import ModelParams, RadialGrid, RadialState


@pytest.mark.parametrize("cells", [8, 101, 1000])
def test_mass_of_constant(cells):
    grid = RadialGrid(cells)
    assert mass(np.full(cells + 1, 0.3), grid) == pytest.approx(0.15, rel=1e-14)


def test_energy_of_zero_state():
    grid = RadialGrid(64)
    assert energy(np.zeros(65), ModelParams(), grid) == pytest.approx(0.25, rel=1e-14)


def test_energy_of_pure_phase_vanishes():
    grid = RadialGrid(64)
    assert energy(np.ones(65), ModelParams(), grid) == 0.0


def test_track_extrema_on_parabola():
    grid = RadialGrid(100)
    v = 0.01 + (grid.nodes - 0.303) ** 2
    v0, rbar, vmin, d2v = track_extrema(1.0 - v, grid)
    assert v0 == pytest.approx(0.01 + 0.303 ** 2)
    assert rbar == pytest.approx(0.303, abs=1e-12)
    assert vmin == pytest.approx(0.01, abs=1e-12)
    assert d2v == pytest.approx(2.0, rel=1e-8)


def test_track_extrema_requires_interior_minimum():
    grid = RadialGrid(20)
    with pytest.raises(NoInteriorMinimum):
        track_extrema(grid.nodes, grid)


def test_series_rejects_non_increasing_time():
    series = DiagnosticsSeries()
    series.append([1.0] * len(DIAGNOSTIC_COLUMNS))
    with pytest.raises(ValueError):
        series.append([1.0] * len(DIAGNOSTIC_COLUMNS))
    with pytest.raises(ValueError):
        series.append([2.0, 1.0])


def test_record_without_minimum_stores_nan():
    grid = RadialGrid(20)
    series = DiagnosticsSeries()
    series.record(RadialState(0.5, -grid.nodes), ModelParams(), grid)
    row = series.to_frame().iloc[0]
    assert row["v0"] == pytest.approx(1.0)
    assert np.isnan(row["rbar"]) and np.isnan(row["vmin"])


def test_frame_conversion(tmp_path):
    series = DiagnosticsSeries()
    series.append([0.0, 0.1, 0.2, -0.3, 0.4, 0.5, 0.6, 0.7])
    series.append([1.0, 0.1, 0.1, -0.2, 0.3, 0.5, 0.5, 0.6])
    frame = series.to_frame()
    assert list(frame.columns) == DIAGNOSTIC_COLUMNS
    path = tmp_path / "diagnostics.csv"
    path.write_text("# header\n" + frame.to_csv(index=False))
    assert DiagnosticsSeries.from_csv(path).rows == series.rows
    with pytest.raises(ValueError):
        DiagnosticsSeries.from_frame(pd.DataFrame({"t": [0.0]}))
