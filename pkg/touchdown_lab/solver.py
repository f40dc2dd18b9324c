"""
Conservative finite differences for the radial Cahn-Hilliard equation and a fully
implicit Euler integrator with step-doubling error control.

Nodes r_i = i*dr carry u and mu; fluxes live at r_{i+1/2}. Node weights w_i make the
flux divergence telescope, so sum_i w_i u_i is conserved exactly, and make w * mu the
gradient of the discrete energy.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded

from touchdown_lab.model import (
    MobilityDomainError,
    ModelParams,
    RadialGrid,
    RadialState,
    free_energy_curvature,
    free_energy_terms,
    mobility,
    mobility_derivative,
)

logger = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Base class for time-integration failures."""


class NewtonDivergence(SolverError):
    """Raised when Newton does not reach the residual tolerance; the caller halves dt."""


class StepSizeUnderflow(SolverError):
    """Raised when the adaptive step falls below dt_min."""


class TouchdownKind(str, Enum):
    REACHED_THRESHOLD = "reached_threshold"
    CROSSED_ONE = "crossed_one"


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-11
    newton_max_iter: int = 25
    time_tol: float = 1e-7
    dt_init: float = 1e-10
    dt_max_growth: float = 2.0
    dt_min_shrink: float = 0.2
    dt_safety: float = 0.9
    dt_min: float = 1e-18
    touchdown_tol: float = 1e-13
    outputs_per_decade: int = 32
    first_output: float = 1e-8

    def __post_init__(self):
        for name in ("newton_tol", "time_tol", "dt_init", "dt_min", "touchdown_tol", "first_output"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if self.dt_max_growth < 1:
            raise ValueError("dt_max_growth must be >= 1")
        if not 0.0 < self.dt_min_shrink < 1.0 or not 0.0 < self.dt_safety < 1.0:
            raise ValueError("dt_min_shrink and dt_safety must lie in (0, 1)")
        if not self.dt_min < self.dt_init:
            raise ValueError("dt_min must be smaller than dt_init")
        if self.outputs_per_decade < 1:
            raise ValueError("outputs_per_decade must be at least 1")


@dataclass
class StepOutcome:
    state: RadialState
    dt_used: float
    dt_next: float
    newton_iters: int
    error_estimate: float


@dataclass(frozen=True)
class TouchdownEvent:
    time: float
    radius: float
    kind: TouchdownKind


@dataclass(frozen=True)
class BoundViolation:
    """min u dropped below -1 at time, at the node radius"""
    time: float
    radius: float
    value: float


def control_volume_weights(grid: RadialGrid) -> np.ndarray:
    """
    Node weights r_i dr, h^2/8 at the centre and r_{N-1/2} dr / 2 at the wall (ghost-node closure)
    """
    h = grid.spacing
    w = grid.nodes * h
    w[0] = h * h / 8.0
    w[-1] = 0.5 * h * (1.0 - 0.5 * h)
    return w


def laplacian(u: np.ndarray, grid: RadialGrid) -> np.ndarray:
    """
    Centred discretization of (1/r) d/dr (r du/dr) with the symmetric limit at r = 0
    and a mirrored ghost node at r = 1
    """
    h = grid.spacing
    r = grid.nodes
    face = grid.half_nodes * np.diff(u) / h
    lap = np.empty_like(u, dtype=float)
    lap[1:-1] = (face[1:] - face[:-1]) / (r[1:-1] * h)
    lap[0] = 4.0 * (u[1] - u[0]) / (h * h)
    lap[-1] = 2.0 * (u[-2] - u[-1]) / (h * h)
    return lap


def laplacian_matrix(grid: RadialGrid) -> sp.csr_matrix:
    h2 = grid.spacing ** 2
    r = grid.nodes
    rh = grid.half_nodes
    size = grid.num_cells + 1
    lower = np.empty(size - 1)
    upper = np.empty(size - 1)
    main = np.full(size, -2.0 / h2)
    upper[1:] = rh[1:] / (r[1:-1] * h2)
    lower[:-1] = rh[:-1] / (r[1:-1] * h2)
    main[0] = -4.0 / h2
    upper[0] = 4.0 / h2
    lower[-1] = 2.0 / h2
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")


def _values(state_or_values) -> np.ndarray:
    if isinstance(state_or_values, RadialState):
        return state_or_values.values
    return np.asarray(state_or_values, dtype=float)


def chemical_potential(state, params: ModelParams, grid: RadialGrid) -> np.ndarray:
    """
    mu_i = -eps^2 L_h(u)_i + f'(u_i)
    """
    u = _values(state)
    _, f_prime = free_energy_terms(u)
    return -params.epsilon ** 2 * laplacian(u, grid) + f_prime


def face_mobility(u: np.ndarray, params: ModelParams) -> np.ndarray:
    # M evaluated at the arithmetic mean of the two neighbouring nodes
    return mobility(0.5 * (u[1:] + u[:-1]), params)


def _face_fluxes(u: np.ndarray, mu: np.ndarray, params: ModelParams, grid: RadialGrid) -> np.ndarray:
    # r_{i+1/2} j_{i+1/2} with j = -M du/dr
    return -grid.half_nodes * face_mobility(u, params) * np.diff(mu) / grid.spacing


def _divergence(face_values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    div = np.zeros(len(face_values) + 1)
    div[1:] += face_values
    div[:-1] -= face_values
    return div / weights


def time_derivative(state, params: ModelParams, grid: RadialGrid) -> np.ndarray:
    """
    Semi-discrete right-hand side du/dt = -(1/r) d(r j)/dr in flux form
    """
    u = _values(state)
    mu = chemical_potential(u, params, grid)
    return _divergence(_face_fluxes(u, mu, params, grid), control_volume_weights(grid))


def _residual(u, u_old, dt, params, grid, weights):
    mu = chemical_potential(u, params, grid)
    return u - u_old - dt * _divergence(_face_fluxes(u, mu, params, grid), weights)


def _jacobian_banded(u, dt, params: ModelParams, grid: RadialGrid, weights, lap) -> np.ndarray:
    size = len(u)
    cells = size - 1
    h = grid.spacing
    mu = chemical_potential(u, params, grid)
    mu_jac = -params.epsilon ** 2 * lap + sp.diags(free_energy_curvature(u))

    diff = sp.diags([-np.ones(cells), np.ones(cells)], [0, 1], shape=(cells, size), format="csr")
    avg = sp.diags([np.full(cells, 0.5), np.full(cells, 0.5)], [0, 1], shape=(cells, size), format="csr")
    u_face = 0.5 * (u[1:] + u[:-1])
    scale = grid.half_nodes / h
    dmu = np.diff(mu)

    flux_jac = (-sp.diags(scale * mobility_derivative(u_face, params) * dmu) @ avg
                - sp.diags(scale * mobility(u_face, params)) @ (diff @ mu_jac))
    rhs_jac = sp.diags(1.0 / weights) @ (diff.T @ flux_jac)
    jac = (sp.identity(size, format="csr") - dt * rhs_jac).tocoo()

    # diagonal-ordered storage for solve_banded with (l, u) = (2, 2)
    offset = jac.row - jac.col
    keep = np.abs(offset) <= 2
    ab = np.zeros((5, size))
    np.add.at(ab, (2 + offset[keep], jac.col[keep]), jac.data[keep])
    return ab


def _newton_solve(u_old: np.ndarray, dt: float, params: ModelParams, grid: RadialGrid,
                  config: SolverConfig):
    weights = control_volume_weights(grid)
    lap = laplacian_matrix(grid)
    u = u_old.copy()
    res = _residual(u, u_old, dt, params, grid, weights)
    res_norm = float(np.max(np.abs(res)))

    for iteration in range(1, config.newton_max_iter + 1):
        if res_norm < config.newton_tol:
            return u, iteration - 1

        ab = _jacobian_banded(u, dt, params, grid, weights, lap)
        delta = solve_banded((2, 2), ab, -res, check_finite=False)
        if not np.all(np.isfinite(delta)):
            raise NewtonDivergence(f"non-finite Newton update at dt={dt:.3e}")

        # damped update: halve until the residual does not grow
        lam = 1.0
        while True:
            trial = u + lam * delta
            try:
                trial_res = _residual(trial, u_old, dt, params, grid, weights)
                trial_norm = float(np.max(np.abs(trial_res)))
            except MobilityDomainError:
                trial_norm = math.inf
            if np.isfinite(trial_norm) and (trial_norm <= res_norm or lam == 1.0 and trial_norm < 10 * res_norm):
                break
            lam *= 0.5
            if lam < 1.0 / 64:
                raise NewtonDivergence(f"line search failed at dt={dt:.3e}, residual {res_norm:.3e}")

        u, res, res_norm = trial, trial_res, trial_norm
        logger.debug("newton it=%d dt=%.3e residual=%.3e lambda=%.3g", iteration, dt, res_norm, lam)
        if lam == 1.0 and float(np.max(np.abs(delta))) < config.newton_tol:
            return u, iteration

    if res_norm < config.newton_tol:
        return u, config.newton_max_iter
    raise NewtonDivergence(
        f"residual {res_norm:.3e} above {config.newton_tol:.1e} after {config.newton_max_iter} iterations"
    )


def implicit_euler_step(state: RadialState, dt: float, params: ModelParams, grid: RadialGrid,
                        config: SolverConfig) -> RadialState:
    """
    One implicit Euler step u_new = u_old + dt * F(u_new), solved by damped Newton
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u_new, _ = _newton_solve(state.values, dt, params, grid, config)
    return RadialState(time=state.time + dt, values=u_new)


def step_factor(error: float, config: SolverConfig) -> float:
    """
    Next-step multiplier for a local error that scales like dt^2, bounded to
    [dt_min_shrink, dt_max_growth]
    """
    if not error > 0:
        return config.dt_max_growth
    factor = config.dt_safety * math.sqrt(config.time_tol / error)
    return min(config.dt_max_growth, max(config.dt_min_shrink, factor))


def _doubling_step(state: RadialState, dt: float, params, grid, config: SolverConfig) -> StepOutcome:
    big, iters_big = _newton_solve(state.values, dt, params, grid, config)
    half, iters_a = _newton_solve(state.values, 0.5 * dt, params, grid, config)
    small, iters_b = _newton_solve(half, 0.5 * dt, params, grid, config)

    error = float(np.max(np.abs(small - big)) / max(np.max(np.abs(small)), 1e-300))
    return StepOutcome(
        state=RadialState(time=state.time + dt, values=small),
        dt_used=dt,
        dt_next=dt * step_factor(error, config),
        newton_iters=iters_big + iters_a + iters_b,
        error_estimate=error,
    )


def detect_touchdown(state: RadialState, touchdown_tol: float) -> Optional[TouchdownEvent]:
    """
    Report touchdown when min v <= touchdown_tol (or u > 1), at the sub-grid minimizer of v
    """
    v = state.v
    k = int(np.argmin(v))
    if v[k] > touchdown_tol:
        return None

    grid = state.grid
    radius = grid.nodes[k]
    if 0 < k < grid.num_cells:
        a, b, c = v[k - 1], v[k], v[k + 1]
        curvature = a - 2.0 * b + c
        if curvature > 0:
            radius += 0.5 * grid.spacing * (a - c) / curvature
    kind = TouchdownKind.CROSSED_ONE if v[k] < 0 else TouchdownKind.REACHED_THRESHOLD
    return TouchdownEvent(time=state.time, radius=float(np.clip(radius, 0.0, 1.0)), kind=kind)


def detect_bound_violation(state: RadialState) -> Optional[BoundViolation]:
    """
    Report min u < -1; the lower bound is not an event that stops the run
    """
    if not state.exceeds_bounds:
        return None
    k = int(np.argmin(state.values))
    if state.values[k] >= -1.0:
        return None
    return BoundViolation(time=state.time, radius=float(state.grid.nodes[k]), value=float(state.values[k]))


def log_spaced_times(t_start: float, t_end: float, per_decade: int, first: float) -> list:
    """
    Output times 10^(k/per_decade) in (t_start, t_end], always ending at t_end
    """
    k = math.ceil(round(math.log10(first) * per_decade, 9))
    times = []
    while True:
        t = 10.0 ** (k / per_decade)
        if t >= t_end:
            break
        if t > t_start:
            times.append(t)
        k += 1
    times.append(float(t_end))
    return times


def adaptive_advance(state: RadialState, t_end: float, params: ModelParams, grid: RadialGrid,
                     config: SolverConfig, sink=None, snapshot_times: Iterable[float] = (),
                     on_snapshot: Optional[Callable[[RadialState], None]] = None,
                     on_violation: Optional[Callable[[BoundViolation], None]] = None):
    """
    Advance to t_end with step doubling; records diagnostics into sink at log-spaced times and
    stops early with a TouchdownEvent when v reaches touchdown_tol or u crosses 1.

    Each entry into min u < -1 is logged and passed to on_violation. The step accepted right
    after a rejection is not allowed to grow the next one.
    """
    if not t_end > state.time:
        raise ValueError(f"t_end={t_end} must exceed the current time {state.time}")

    outputs = log_spaced_times(state.time, t_end, config.outputs_per_decade, config.first_output)
    snapshots = {float(t) for t in snapshot_times if state.time < t <= t_end}
    output_set = set(outputs)
    marks = sorted(output_set | snapshots)

    event = detect_touchdown(state, config.touchdown_tol)
    if event is not None:
        return state, event

    def check_bounds(current: RadialState, was_violating: bool) -> bool:
        violation = detect_bound_violation(current)
        if violation is not None and not was_violating:
            logger.warning("u = %.6e below -1 at t=%.6e, r=%.5f", violation.value, violation.time,
                           violation.radius)
            if on_violation is not None:
                on_violation(violation)
        return violation is not None

    violating = check_bounds(state, False)
    dt = config.dt_init
    steps = rejected = 0
    after_rejection = False
    decade = math.floor(math.log10(max(state.time, config.first_output)))
    for target in marks:
        while state.time < target:
            step = min(dt, target - state.time)
            clipped = step < dt
            try:
                outcome = _doubling_step(state, step, params, grid, config)
            except NewtonDivergence as exc:
                logger.debug("step %.3e rejected: %s", step, exc)
                rejected += 1
                after_rejection = True
                dt = 0.5 * step
                if dt < config.dt_min:
                    raise StepSizeUnderflow(f"dt={dt:.3e} below dt_min at t={state.time:.6e}") from exc
                continue

            if outcome.error_estimate > config.time_tol:
                rejected += 1
                after_rejection = True
                dt = outcome.dt_next
                if dt < config.dt_min:
                    raise StepSizeUnderflow(f"dt={dt:.3e} below dt_min at t={state.time:.6e}")
                continue

            steps += 1
            state = outcome.state
            if target - state.time <= 1e-12 * target:
                state.time = target
            if clipped:
                dt = dt * min(outcome.dt_next / step, 1.0)
            elif after_rejection:
                dt = min(outcome.dt_next, step)
            else:
                dt = outcome.dt_next
            after_rejection = False

            violating = check_bounds(state, violating)
            event = detect_touchdown(state, config.touchdown_tol)
            if event is not None:
                if sink is not None:
                    sink.record(state, params, grid)
                logger.info("touchdown (%s) at t=%.6e, r=%.5f", event.kind.value, event.time, event.radius)
                return state, event

        if target in output_set and sink is not None:
            sink.record(state, params, grid)
        if target in snapshots and on_snapshot is not None:
            on_snapshot(state)

        current = math.floor(math.log10(target))
        if current > decade:
            decade = current
            logger.info("t=%.3e reached: %d steps accepted, %d rejected, dt=%.3e",
                        target, steps, rejected, dt)

    return state, None
