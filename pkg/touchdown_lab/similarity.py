"""
Power-law exponents and self-similar collapse of the diagnostics and snapshots.

sigma(s) is the local slope of log y against s = log t, fitted by least squares over a
sliding window of 2 * window + 1 samples.
"""
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np
import pandas as pd

from touchdown_lab.diagnostics import DiagnosticsSeries, track_extrema
from touchdown_lab.model import RadialState

DEFAULT_WINDOW = 8
DEFAULT_TAIL_FRACTION = 0.2
PLATEAU_VARIANCE = 1e-3


class SimilarityError(ValueError):
    pass


class NonPositiveData(SimilarityError):
    pass


class NoCrossing(SimilarityError):
    pass


class PlateauNotReached(SimilarityError):
    pass


@dataclass
class LogSlopeSeries:
    s: np.ndarray
    sigma: np.ndarray
    window: int

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.s, self.sigma])

    def __len__(self):
        return len(self.s)


@dataclass
class CollapseProfile:
    abscissa: np.ndarray
    ordinate: np.ndarray
    time_label: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"abscissa": self.abscissa, "ordinate": self.ordinate})


@dataclass(frozen=True)
class ExponentEstimate:
    alpha_hat: float
    beta_hat: float
    gamma_hat: float
    min_sigma: float


def log_slope(times, values, window: int = DEFAULT_WINDOW) -> LogSlopeSeries:
    """
    Sliding least-squares slope of log y against log t, one value per interior sample
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise SimilarityError("times and values differ in length")
    if window < 1:
        raise SimilarityError("window must be at least 1")
    if len(t) < 2 * window + 1:
        raise SimilarityError(f"need at least {2 * window + 1} samples, got {len(t)}")
    if np.any(t <= 0) or np.any(y <= 0):
        raise NonPositiveData("log slopes need positive times and values")

    s = np.log(t)
    if np.any(np.diff(s) <= 0):
        raise SimilarityError("times must be strictly increasing")

    # centred rolling least squares: slope = cov(s, log y) / var(s) over 2 * window + 1 samples
    x = pd.Series(s - s.mean())
    log_y = pd.Series(np.log(y))
    log_y -= log_y.mean()
    span = 2 * window + 1
    slopes = (log_y.rolling(span, center=True).cov(x) / x.rolling(span, center=True).var()).to_numpy()
    centers = slice(window, len(s) - window)
    return LogSlopeSeries(s=s[centers], sigma=slopes[centers], window=window)


def _finite_positive(times: np.ndarray, values: np.ndarray):
    keep = np.isfinite(values) & (values > 0) & (times > 0)
    return times[keep], values[keep]


def _slope_frame(t: np.ndarray, values: np.ndarray, window: int, name: str) -> pd.DataFrame:
    times, kept = _finite_positive(t, values)
    if len(times) < 2 * window + 1:
        return pd.DataFrame({"s": np.empty(0), name: np.empty(0)})
    series = log_slope(times, kept, window=window)
    return pd.DataFrame({"s": series.s, name: series.sigma})


def exponent_table(diag: DiagnosticsSeries, window: int = DEFAULT_WINDOW) -> pd.DataFrame:
    """
    sigma (from v0) and sigma_star (from vmin) merged on s; a column with too few
    usable samples stays empty
    """
    t = diag.column("t")
    left = _slope_frame(t, diag.column("v0"), window, "sigma")
    right = _slope_frame(t, diag.column("vmin"), window, "sigma_star")
    return left.merge(right, on="s", how="outer").sort_values("s", ignore_index=True)


def _plateau(series: LogSlopeSeries, tail_fraction: float, label: str) -> float:
    s_min, s_max = series.s[0], series.s[-1]
    tail = series.sigma[series.s >= s_max - tail_fraction * (s_max - s_min)]
    variance = float(np.var(tail))
    if variance > PLATEAU_VARIANCE:
        raise PlateauNotReached(f"{label} tail variance {variance:.3e} exceeds {PLATEAU_VARIANCE:.0e}")
    return float(np.mean(tail))


def estimate_exponents(diag: DiagnosticsSeries, tail_fraction: float = DEFAULT_TAIL_FRACTION,
                       window: int = DEFAULT_WINDOW) -> ExponentEstimate:
    """
    Terminal plateaus of sigma and sigma_star; gamma_hat is beta_hat / 2 and min_sigma is the dip
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise SimilarityError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    t = diag.column("t")
    central = log_slope(*_finite_positive(t, diag.column("v0")), window=window)
    minimum = log_slope(*_finite_positive(t, diag.column("vmin")), window=window)

    alpha_hat = _plateau(central, tail_fraction, "sigma")
    beta_hat = _plateau(minimum, tail_fraction, "sigma_star")
    return ExponentEstimate(
        alpha_hat=alpha_hat,
        beta_hat=beta_hat,
        gamma_hat=beta_hat / 2.0,
        min_sigma=float(np.min(central.sigma)),
    )


def collapse_central(snapshots: Iterable[RadialState]) -> List[CollapseProfile]:
    """
    Curves r -> v(r, t) / v(0, t) on [0, rbar(t)]
    """
    profiles = []
    for state in snapshots:
        grid = state.grid
        v = state.v
        if v[0] <= 0:
            raise NonPositiveData(f"v(0, t) = {v[0]:.3e} at t = {state.time:.6e}")
        _, rbar, _, _ = track_extrema(state, grid)
        keep = grid.nodes <= rbar
        profiles.append(CollapseProfile(grid.nodes[keep], v[keep] / v[0], float(state.time)))
    return profiles


def _width_to_level(r: np.ndarray, w: np.ndarray, rbar: float, level: float) -> float:
    right = np.flatnonzero((r > rbar) & (w >= level))
    if len(right) == 0:
        raise NoCrossing(f"w stays below {level} to the right of rbar = {rbar:.6f}")
    j = int(right[0])
    r0, w0 = (r[j - 1], w[j - 1]) if r[j - 1] > rbar else (rbar, 1.0)
    r1, w1 = r[j], w[j]
    return r0 + (level - w0) * (r1 - r0) / (w1 - w0) - rbar


def collapse_touchdown(snapshots: Iterable[RadialState], level: float = 3.0) -> List[CollapseProfile]:
    """
    Curves rho -> w with w = v / vmin and rho = (r - rbar) / dr(t), where dr(t) is the distance
    from rbar to the first point on its right with w = level. w(0) = 1 and w(1) = level exactly.
    """
    profiles = []
    for state in snapshots:
        grid = state.grid
        _, rbar, vmin, _ = track_extrema(state, grid)
        if not vmin > 0:
            raise NonPositiveData(f"vmin = {vmin:.3e} at t = {state.time:.6e}")
        w = state.v / vmin
        width = _width_to_level(grid.nodes, w, rbar, level)
        rho = (grid.nodes - rbar) / width

        away = (np.abs(rho) > 1e-12) & (np.abs(rho - 1.0) > 1e-12)
        abscissa = np.concatenate([rho[away], [0.0, 1.0]])
        ordinate = np.concatenate([w[away], [1.0, level]])
        order = np.argsort(abscissa, kind="stable")
        profiles.append(CollapseProfile(abscissa[order], ordinate[order], float(state.time)))
    return profiles


def collapse_spread(profiles: Sequence[CollapseProfile], abscissa: np.ndarray) -> float:
    """
    Largest relative deviation between the collapsed curves, sampled at common abscissae
    """
    curves = np.array([np.interp(abscissa, p.abscissa, p.ordinate) for p in profiles])
    reference = curves[-1]
    return float(np.max(np.abs(curves - reference) / np.abs(reference)))


def central_spread(profiles: Sequence[CollapseProfile], fraction: float = 0.5, samples: int = 33) -> float:
    """
    Spread of central curves near r = 0, on [0, fraction * smallest rbar]
    """
    reach = fraction * min(p.abscissa[-1] for p in profiles)
    return collapse_spread(profiles, np.linspace(0.0, reach, samples))


def touchdown_spread(profiles: Sequence[CollapseProfile], half_width: float = 0.5, samples: int = 33) -> float:
    return collapse_spread(profiles, np.linspace(-half_width, half_width, samples))
