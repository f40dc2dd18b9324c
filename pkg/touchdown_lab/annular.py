"""
Stationary profiles of the radial Cahn-Hilliard equation.

solve_annular finds the quasi-stationary profile U* on (r*, 1] that touches U = 1 with zero
slope at r* and carries the remaining mass; solve_stationary finds the full equilibrium on
[0, 1] with the same mass. Both use scipy's collocation solver on the first-order system

    S' = U r,   U' = W,   W' = (2/eps^2) U (U^2 - 1) - mu/eps^2 - W/r

with the chemical-potential constant mu as an unknown parameter.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, solve_bvp, solve_ivp, trapezoid
from scipy.interpolate import CubicHermiteSpline

from touchdown_lab.model import free_energy_terms

logger = logging.getLogger(__name__)

R_STAR_BOUNDS = (0.05, 0.95)
MASS_MARGIN = 1e-3


class AnnularError(RuntimeError):
    pass


class TrivialBranch(AnnularError):
    """Collocation collapsed onto U* = 1, mu0 = 0, which carries no interface."""


class NoConvergence(AnnularError):
    pass


@dataclass
class AnnularSolution:
    r_star: float
    mu0: float
    r: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    S: np.ndarray = field(repr=False)
    secant_iterations: int = 0

    def u_star(self, r):
        """
        Dense U*(r); equals 1 on [0, r*] where the annular profile is in contact
        """
        r = np.asarray(r, dtype=float)
        spline = CubicHermiteSpline(self.r, self.U, self.W)
        inside = np.clip(r, self.r_star, 1.0)
        values = np.where(r <= self.r_star, 1.0, spline(inside))
        return float(values) if values.ndim == 0 else values

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"r": self.r, "U_star": self.U, "W": self.W, "S": self.S})


@dataclass
class StationarySolution:
    r: np.ndarray = field(repr=False)
    U: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    mu_c: float = 0.0

    @property
    def max_excess(self) -> float:
        return float(np.max(self.U) - 1.0)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"r": self.r, "U": self.U, "W": self.W})


def _check_mass(m0: float) -> None:
    if m0 >= 0.5 - MASS_MARGIN:
        raise TrivialBranch(f"m0 = {m0} leaves no room for an interface (U* = 1 is the only profile)")
    if m0 <= -0.5 + MASS_MARGIN:
        raise ValueError(f"m0 = {m0} is too close to -1/2 for an interface solution")


def interface_radius(m0: float) -> float:
    # sharp interface between +1 inside and -1 outside carrying mass m0
    return math.sqrt(m0 + 0.5)


def _tanh_guess(r: np.ndarray, center: float, epsilon: float) -> np.ndarray:
    U = -np.tanh((r - center) / epsilon)
    W = -(1.0 - U * U) / epsilon
    S = cumulative_trapezoid(U * r, r, initial=0.0)
    return np.vstack([S, U, W])


def _solve_contact(r_star: float, epsilon: float, x: np.ndarray, guess: np.ndarray, mu_guess: float,
                   tol: float, max_nodes: int):
    length = 1.0 - r_star
    eps2 = epsilon * epsilon

    def rhs(xs, y, p):
        r = r_star + length * xs
        S, U, W = y
        return length * np.vstack([
            U * r,
            W,
            2.0 * U * (U * U - 1.0) / eps2 - p[0] / eps2 - W / r,
        ])

    def bc(ya, yb, p):
        return np.array([ya[1] - 1.0, ya[2], ya[0], yb[2]])

    return solve_bvp(rhs, bc, x, guess, p=[mu_guess], tol=tol, max_nodes=max_nodes)


def solve_annular(epsilon: float, m0: float, tol: float = 1e-8, mesh_intervals: int = 4000,
                  max_iter: int = 40, max_nodes: int = 200000) -> AnnularSolution:
    """
    Annular profile with contact at r* (U = 1, U' = 0, no enclosed annular mass), no flux at
    r = 1 and total mass m0. The outer secant iteration moves r* until S(1) = m0 - r*^2 / 2.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _check_mass(m0)
    x = np.linspace(0.0, 1.0, mesh_intervals + 1)
    r_c = interface_radius(m0)
    lo, hi = R_STAR_BOUNDS

    def fresh_guess(r_star, shift=0.0):
        r = r_star + (1.0 - r_star) * x
        return _tanh_guess(r, r_star + 2.6 * epsilon + shift, epsilon)

    state = {"guess": None, "mu": epsilon}

    def mass_defect(r_star: float):
        guess = state["guess"] if state["guess"] is not None else fresh_guess(r_star)
        sol = _solve_contact(r_star, epsilon, x, guess, state["mu"], tol, max_nodes)
        if sol.success and np.max(np.abs(sol.y[1] - 1.0)) < 10 * tol:
            logger.warning("annular solve at r*=%.6f collapsed onto U*=1; restarting from a perturbed guess",
                           r_star)
            sol = _solve_contact(r_star, epsilon, x, fresh_guess(r_star, shift=0.5 * epsilon),
                                 2.0 * epsilon, tol, max_nodes)
            if sol.success and np.max(np.abs(sol.y[1] - 1.0)) < 10 * tol:
                raise TrivialBranch(f"annular solve at r*={r_star:.6f} returned U* = 1")
        if not sol.success:
            raise NoConvergence(f"collocation failed at r*={r_star:.6f}: {sol.message}")
        state["guess"] = sol.sol(x)
        state["mu"] = float(sol.p[0])
        defect = float(sol.y[0, -1]) - (m0 - 0.5 * r_star ** 2)
        logger.debug("r*=%.10f mu0=%.10f mass defect=%.3e nodes=%d", r_star, sol.p[0], defect, len(sol.x))
        return defect, sol

    r_prev = min(max(lo, r_c - 2.6 * epsilon), hi)
    r_curr = min(r_prev + 0.1 * epsilon, hi)
    g_prev, _ = mass_defect(r_prev)
    g_curr, sol = mass_defect(r_curr)
    # sign-changing pair (r_a, g_a, r_b, g_b) once one is known
    bracket = (r_prev, g_prev, r_curr, g_curr) if g_prev * g_curr < 0 else None

    for iteration in range(1, max_iter + 1):
        if abs(g_curr) < tol:
            return _annular_result(r_curr, sol, iteration)
        if g_curr == g_prev:
            raise NoConvergence("secant iteration stalled: equal mass defects")
        r_next = r_curr - g_curr * (r_curr - r_prev) / (g_curr - g_prev)
        if bracket is not None and not min(bracket[0], bracket[2]) < r_next < max(bracket[0], bracket[2]):
            r_next = 0.5 * (bracket[0] + bracket[2])
        r_next = min(max(r_next, lo), hi)
        if abs(r_next - r_curr) < 1e-13:
            return _annular_result(r_curr, sol, iteration)

        g_next, sol_next = mass_defect(r_next)
        if g_next * g_curr < 0:
            bracket = (r_curr, g_curr, r_next, g_next)
        elif bracket is not None:
            r_a, g_a, r_b, g_b = bracket
            bracket = (r_next, g_next, r_b, g_b) if g_next * g_a > 0 else (r_a, g_a, r_next, g_next)
        r_prev, g_prev = r_curr, g_curr
        r_curr, g_curr, sol = r_next, g_next, sol_next

    raise NoConvergence(f"mass constraint not met after {max_iter} secant iterations (defect {g_curr:.3e})")


def _annular_result(r_star: float, sol, iterations: int) -> AnnularSolution:
    mu0 = float(sol.p[0])
    r = r_star + (1.0 - r_star) * sol.x
    logger.info("annular profile converged: r*=%.6f mu0=%.6e after %d secant iterations",
                r_star, mu0, iterations)
    # W is dU/dr; the collocation unknown is already in r-units
    return AnnularSolution(
        r_star=r_star,
        mu0=mu0,
        r=r,
        U=sol.y[1].copy(),
        W=sol.y[2].copy(),
        S=sol.y[0].copy(),
        secant_iterations=iterations,
    )


def taylor_coefficient_b2(solution: AnnularSolution, epsilon: float) -> float:
    """
    Leading coefficient of 1 - U* = b2 (r - r*)^2 near the contact point
    """
    return solution.mu0 / (2.0 * epsilon ** 2)


def solve_stationary(epsilon: float, m0: float, tol: float = 1e-8, mesh_intervals: int = 4000,
                     max_nodes: int = 200000) -> StationarySolution:
    """
    Equilibrium U on [0, 1] with U'(0) = U'(1) = 0 and int_0^1 U r dr = m0
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _check_mass(m0)
    eps2 = epsilon * epsilon
    r = np.linspace(0.0, 1.0, mesh_intervals + 1)
    guess = _tanh_guess(r, interface_radius(m0), epsilon)
    guess[2, 0] = 0.0
    singular = np.zeros((3, 3))
    singular[2, 2] = -1.0

    def rhs(rs, y, p):
        S, U, W = y
        return np.vstack([U * rs, W, 2.0 * U * (U * U - 1.0) / eps2 - p[0] / eps2])

    def bc(ya, yb, p):
        return np.array([ya[0], ya[2], yb[2], yb[0] - m0])

    sol = solve_bvp(rhs, bc, r, guess, p=[0.0], S=singular, tol=tol, max_nodes=max_nodes)
    if not sol.success:
        raise NoConvergence(f"stationary collocation failed: {sol.message}")
    logger.info("stationary profile converged: mu_c=%.6e, max U - 1 = %.3e",
                sol.p[0], np.max(sol.y[1]) - 1.0)
    return StationarySolution(r=sol.x.copy(), U=sol.y[1].copy(), W=sol.y[2].copy(), mu_c=float(sol.p[0]))


def stationary_energy(solution: StationarySolution, epsilon: float, samples: int = 20001) -> float:
    """
    int_0^1 [eps^2/2 U'^2 + f(U)] r dr of the equilibrium profile
    """
    spline = CubicHermiteSpline(solution.r, solution.U, solution.W)
    r = np.linspace(0.0, 1.0, samples)
    U = spline(r)
    W = spline(r, 1)
    f, _ = free_energy_terms(U)
    return float(trapezoid((0.5 * epsilon ** 2 * W * W + f) * r, r))


def shooting_profile(solution: AnnularSolution, epsilon: float, r_end: float,
                     rtol: float = 1e-12, atol: float = 1e-12) -> np.ndarray:
    """
    Re-integrate U*, W from the contact point with mu0 fixed, returning (U, W) at r_end
    """
    eps2 = epsilon * epsilon
    mu0 = solution.mu0

    def rhs(r, y):
        U, W = y
        return [W, 2.0 * U * (U * U - 1.0) / eps2 - mu0 / eps2 - W / r]

    out = solve_ivp(rhs, (solution.r_star, r_end), [1.0, 0.0], method="DOP853", rtol=rtol, atol=atol)
    if not out.success:
        raise NoConvergence(f"shooting integration failed: {out.message}")
    return out.y[:, -1]
