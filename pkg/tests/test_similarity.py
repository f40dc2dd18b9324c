import numpy as np
import pytest

from touchdown_lab.diagnostics import DiagnosticsSeries
from touchdown_lab.model import RadialGrid, RadialState
from touchdown_lab.similarity import (
    NonPositiveData,
    PlateauNotReached,
    SimilarityError,
    central_spread,
    collapse_central,
    collapse_spread,
    collapse_touchdown,
    estimate_exponents,
    exponent_table,
    log_slope,
    touchdown_spread,
)


def _series(v0, vmin, times):
    series = DiagnosticsSeries()
    for t, a, b in zip(times, v0, vmin):
        series.append([t, -0.2, 0.1, -1e-3, a, 0.25, b, 1.0])
    return series


def test_log_slope_of_power_law():
    t = np.logspace(0, 10, 81)
    out = log_slope(t, 3.0 * t ** (-1.0 / 6.0), window=4)
    assert len(out) == 81 - 8
    np.testing.assert_allclose(out.sigma, -1.0 / 6.0, rtol=1e-9)
    np.testing.assert_allclose(out.s, np.log(t[4:-4]))
    assert out.points.shape == (73, 2)


def test_log_slope_input_checks():
    t = np.logspace(0, 1, 10)
    with pytest.raises(SimilarityError):
        log_slope(t, t, window=8)
    with pytest.raises(NonPositiveData):
        log_slope(t, -t, window=2)
    with pytest.raises(SimilarityError):
        log_slope(t, t[:-1], window=2)


def test_estimate_exponents_from_power_laws():
    t = np.logspace(0, 12, 120)
    series = _series(t ** (-1.0 / 6.0), t ** (-1.0 / 3.0), t)
    estimate = estimate_exponents(series)
    assert estimate.alpha_hat == pytest.approx(-1.0 / 6.0, rel=1e-8)
    assert estimate.beta_hat == pytest.approx(-1.0 / 3.0, rel=1e-8)
    assert estimate.gamma_hat == pytest.approx(-1.0 / 6.0, rel=1e-8)
    assert estimate.min_sigma == pytest.approx(-1.0 / 6.0, rel=1e-8)


def test_estimate_exponents_reports_dip():
    t = np.logspace(0, 12, 240)
    s = np.log(t)
    # slope -1/4 early, relaxing to -1/6
    log_v0 = -s / 6.0 - (1.0 / 12.0) * 4.0 * np.tanh(s / 4.0)
    series = _series(np.exp(log_v0), t ** (-1.0 / 3.0), t)
    estimate = estimate_exponents(series)
    assert estimate.alpha_hat == pytest.approx(-1.0 / 6.0, abs=1e-3)
    assert estimate.min_sigma == pytest.approx(-0.25, abs=1e-2)


def test_plateau_not_reached():
    t = np.logspace(0, 12, 200)
    s = np.log(t)
    series = _series(t ** (-1.0 / 6.0) * np.exp(0.5 * np.sin(s)), t ** (-1.0 / 3.0), t)
    with pytest.raises(PlateauNotReached):
        estimate_exponents(series)


def test_exponent_table_skips_missing_minimum():
    t = np.logspace(0, 6, 60)
    vmin = t ** (-1.0 / 3.0)
    vmin[:10] = np.nan
    table = exponent_table(_series(t ** (-1.0 / 6.0), vmin, t), window=3)
    assert list(table.columns) == ["s", "sigma", "sigma_star"]
    assert table["sigma"].notna().sum() == 54
    assert table["sigma_star"].notna().sum() == 44
    np.testing.assert_allclose(table["sigma_star"].dropna(), -1.0 / 3.0, rtol=1e-9)


def _parabola_state(time, vmin, center=0.3, cells=400):
    r = RadialGrid(cells).nodes
    return RadialState(time, 1.0 - (vmin + (r - center) ** 2))


def test_touchdown_collapse_hits_anchor_points():
    (profile,) = collapse_touchdown([_parabola_state(1.0, 0.01)], level=3.0)
    k0 = np.flatnonzero(profile.abscissa == 0.0)
    k1 = np.flatnonzero(profile.abscissa == 1.0)
    assert profile.ordinate[k0[0]] == 1.0
    assert profile.ordinate[k1[0]] == 3.0
    assert np.all(np.diff(profile.abscissa) >= 0)


def test_touchdown_collapse_of_self_similar_family():
    states = [_parabola_state(t, 0.01 / t) for t in (1.0, 4.0, 16.0)]
    profiles = collapse_touchdown(states)
    spread = collapse_spread(profiles, np.linspace(-0.8, 0.8, 9))
    assert spread < 2e-2


def test_central_collapse_normalizes_center():
    profiles = collapse_central([_parabola_state(2.0, 0.01)])
    assert profiles[0].ordinate[0] == pytest.approx(1.0)
    assert profiles[0].abscissa[-1] <= 0.3 + 1e-12
    assert profiles[0].time_label == 2.0
    assert list(profiles[0].to_frame().columns) == ["abscissa", "ordinate"]


def test_collapse_spread_of_identical_profiles():
    profiles = collapse_touchdown([_parabola_state(1.0, 0.02)] * 2)
    assert collapse_spread(profiles, np.linspace(-0.5, 0.9, 15)) == 0.0


def test_exponent_table_ignores_initial_row():
    t = np.concatenate([[0.0], np.logspace(-4, 2, 49)])
    v0 = np.concatenate([[1.9], 0.5 * t[1:] ** (-1.0 / 6.0)])
    vmin = np.full_like(t, np.nan)
    table = exponent_table(_series(v0, vmin, t), window=4)
    assert np.isfinite(table["s"]).all()
    assert table["sigma"].notna().sum() == 49 - 8
    assert table["sigma_star"].isna().all()
    np.testing.assert_allclose(table["sigma"], -1.0 / 6.0, rtol=1e-9)


def test_exponent_table_of_short_series_is_empty():
    t = np.logspace(0, 1, 5)
    table = exponent_table(_series(t, t, t), window=4)
    assert list(table.columns) == ["s", "sigma", "sigma_star"]
    assert len(table) == 0


def test_named_spreads_of_identical_profiles():
    touchdown = collapse_touchdown([_parabola_state(1.0, 0.02)] * 3)
    assert touchdown_spread(touchdown) == 0.0
    central = collapse_central([_parabola_state(1.0, 0.02)] * 2)
    assert central_spread(central) == 0.0


def test_central_spread_sees_distorted_center():
    states = [_parabola_state(1.0, 0.02), _parabola_state(1.0, 0.04)]
    assert central_spread(collapse_central(states)) > 0.0
