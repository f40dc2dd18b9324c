"""
Mass, energy and dissipation of a radial state, plus tracking of the interior minimum of v.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np
import pandas as pd

from touchdown_lab.model import ModelParams, RadialGrid, RadialState, free_energy_terms
from touchdown_lab.outputs import read_csv
from touchdown_lab.solver import chemical_potential, control_volume_weights, face_mobility

DIAGNOSTIC_COLUMNS = ["t", "mass", "energy", "dissipation", "v0", "rbar", "vmin", "d2v"]


class NoInteriorMinimum(ValueError):
    """Raised when v has no local minimum strictly inside (0, 1)."""


def _values(state) -> np.ndarray:
    if isinstance(state, RadialState):
        return state.values
    return np.asarray(state, dtype=float)


def _normalization(weights: np.ndarray) -> float:
    # rescale so the weights integrate r over [0, 1] to exactly 1/2
    return 0.5 / float(np.sum(weights))


def mass(state, grid: RadialGrid) -> float:
    """
    Quadrature of int_0^1 u r dr with the scheme's node weights; u = c gives c/2 exactly
    and the value is invariant under the discrete flow.
    """
    w = control_volume_weights(grid)
    return float(np.dot(w, _values(state))) * _normalization(w)


def energy(state, params: ModelParams, grid: RadialGrid) -> float:
    """
    Discrete free energy int_0^1 [eps^2/2 (u_r)^2 + f(u)] r dr whose node gradient is w * mu
    """
    u = _values(state)
    w = control_volume_weights(grid)
    f, _ = free_energy_terms(u)
    gradient = 0.5 * params.epsilon ** 2 * np.sum(grid.half_nodes * np.diff(u) ** 2) / grid.spacing
    return (float(np.dot(w, f)) + float(gradient)) * _normalization(w)


def dissipation(state, params: ModelParams, grid: RadialGrid) -> float:
    """
    -int_0^1 M(u) (mu_r)^2 r dr at the flux faces; equals dE/dt along the semi-discrete flow
    """
    u = _values(state)
    h = grid.spacing
    mu = chemical_potential(u, params, grid)
    slope = np.diff(mu) / h
    rate = np.sum(grid.half_nodes * face_mobility(u, params) * slope * slope) * h
    return -float(rate) * _normalization(control_volume_weights(grid))


def track_extrema(state, grid: RadialGrid):
    """
    Return (v0, rbar, vmin, d2v) for v = 1 - u. The interior minimum is located on the grid
    and refined by the parabola through the minimizing node and its two neighbours.
    """
    v = 1.0 - _values(state)
    h = grid.spacing
    inner = v[1:-1]
    is_min = (inner <= v[:-2]) & (inner < v[2:])
    candidates = np.flatnonzero(is_min) + 1
    if len(candidates) == 0:
        raise NoInteriorMinimum("v is monotone on (0, 1)")
    k = int(candidates[np.argmin(v[candidates])])

    a, b, c = v[k - 1], v[k], v[k + 1]
    second = a - 2.0 * b + c
    if second > 0:
        delta = 0.5 * (a - c) / second
    else:
        delta = 0.0
    rbar = grid.nodes[k] + delta * h
    vmin = b - 0.25 * (a - c) * delta
    return float(v[0]), float(rbar), float(vmin), float(second / (h * h))


@dataclass
class DiagnosticsSeries:
    """
    Append-only time series of diagnostics, one row per output time
    """
    rows: List[tuple] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def append(self, row) -> None:
        row = tuple(float(x) for x in row)
        if len(row) != len(DIAGNOSTIC_COLUMNS):
            raise ValueError(f"expected {len(DIAGNOSTIC_COLUMNS)} values, got {len(row)}")
        if self.rows and not row[0] > self.rows[-1][0]:
            raise ValueError(f"time {row[0]} does not increase past {self.rows[-1][0]}")
        self.rows.append(row)

    def record(self, state: RadialState, params: ModelParams, grid: RadialGrid) -> None:
        # before an interior minimum forms, the extremum columns hold NaN
        try:
            v0, rbar, vmin, d2v = track_extrema(state, grid)
        except NoInteriorMinimum:
            v0, rbar, vmin, d2v = float(state.v[0]), np.nan, np.nan, np.nan
        self.append((
            state.time,
            mass(state, grid),
            energy(state, params, grid),
            dissipation(state, params, grid),
            v0, rbar, vmin, d2v,
        ))

    def column(self, name: str) -> np.ndarray:
        return self.to_frame()[name].to_numpy()

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=DIAGNOSTIC_COLUMNS)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "DiagnosticsSeries":
        missing = [c for c in DIAGNOSTIC_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f"diagnostics table lacks columns {missing}")
        series = cls()
        for row in frame[DIAGNOSTIC_COLUMNS].itertuples(index=False):
            series.append(row)
        return series

    @classmethod
    def from_csv(cls, path) -> "DiagnosticsSeries":
        return cls.from_frame(read_csv(path))
