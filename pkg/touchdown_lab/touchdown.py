"""
Inner touchdown profile: the connecting orbit of phi^n phi''' = 1 that grows like -y on the
left and like A y^2 on the right, together with the far-field expansions of both tails.

All three conditions are imposed at y = -L from the left expansion (value gauge, slope and
curvature); translation is the only freedom, and it is removed afterwards by shifting the
minimizer of phi to y = 0.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Optional

import numpy as np
import pandas as pd
from scipy.integrate import solve_bvp, solve_ivp
from scipy.interpolate import BPoly
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

LEFT_CORRECTION_SHARE = 0.01


class TouchdownError(RuntimeError):
    pass


class FarFieldDomainError(ValueError):
    pass


class NegativeExcursion(TouchdownError):
    """The orbit reached phi <= 0 before turning up."""


class NoConvergence(TouchdownError):
    pass


class FarFieldSide(str, Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class FarFieldExpansion:
    """
    Tail of the orbit. Left (x = -y): phi = x + C x^p + B with p = 3 - n, or x - ln(x)/2 + B
    when n = 3. Right: phi = A y^2 + D y + E + K y^q with q = 3 - 2n.
    """
    side: FarFieldSide
    n: float
    coefficients: Dict[str, float] = field(default_factory=dict)

    @property
    def exponent(self) -> float:
        return 3.0 - self.n if self.side is FarFieldSide.LEFT else 3.0 - 2.0 * self.n

    @property
    def logarithmic(self) -> bool:
        return self.side is FarFieldSide.LEFT and self.n == 3


def _left_amplitude(n: float) -> float:
    if n == 3:
        return -0.5
    return 1.0 / ((n - 1.0) * (n - 2.0) * (n - 3.0))


def left_far_field(n: float, offset: float = 0.0) -> FarFieldExpansion:
    if not n > 2:
        raise FarFieldDomainError(f"left far field needs n > 2, got {n}")
    return FarFieldExpansion(FarFieldSide.LEFT, float(n), {"C": _left_amplitude(n), "B": float(offset)})


def right_far_field(n: float, A: float, D: float = 0.0, E: float = 0.0) -> FarFieldExpansion:
    if not n > 1.5:
        raise FarFieldDomainError(f"right far field needs n > 3/2, got {n}")
    if not A > 0:
        raise FarFieldDomainError(f"quadratic coefficient must be positive, got {A}")
    q = 3.0 - 2.0 * n
    K = A ** (-n) / (q * (q - 1.0) * (q - 2.0))
    return FarFieldExpansion(FarFieldSide.RIGHT, float(n), {"A": A, "D": D, "E": E, "K": K})


def far_field_eval(expansion: FarFieldExpansion, y):
    """
    (phi, phi', phi'') of the expansion at y; derivatives are taken in y term by term
    """
    y = np.asarray(y, dtype=float)
    c = expansion.coefficients
    if expansion.side is FarFieldSide.LEFT:
        x = -y
        if np.any(x <= 0):
            raise ValueError("left far field is evaluated at y < 0 only")
        if expansion.logarithmic:
            phi = x - 0.5 * np.log(x) + c["B"]
            dphi = -(1.0 - 0.5 / x)
            d2phi = 0.5 / (x * x)
        else:
            p = expansion.exponent
            C = c["C"]
            phi = x + C * x ** p + c["B"]
            dphi = -(1.0 + C * p * x ** (p - 1.0))
            d2phi = C * p * (p - 1.0) * x ** (p - 2.0)
        return phi, dphi, d2phi

    if np.any(y <= 0):
        raise ValueError("right far field is evaluated at y > 0 only")
    q = expansion.exponent
    A, D, E, K = c["A"], c["D"], c["E"], c["K"]
    phi = A * y * y + D * y + E + K * y ** q
    dphi = 2.0 * A * y + D + q * K * y ** (q - 1.0)
    d2phi = 2.0 * A + q * (q - 1.0) * K * y ** (q - 2.0)
    return phi, dphi, d2phi


def fit_right_far_field(n: float, y: float, phi: float, dphi: float, d2phi: float,
                        iterations: int = 50) -> FarFieldExpansion:
    """
    Match A, D, E (and the dependent K) to the orbit's value and two derivatives at y > 0
    """
    q = 3.0 - 2.0 * n
    A = 0.5 * d2phi
    for _ in range(iterations):
        K = A ** (-n) / (q * (q - 1.0) * (q - 2.0))
        A_next = 0.5 * (d2phi - q * (q - 1.0) * K * y ** (q - 2.0))
        if abs(A_next - A) <= 1e-15 * abs(A):
            A = A_next
            break
        A = A_next
    K = A ** (-n) / (q * (q - 1.0) * (q - 2.0))
    D = dphi - 2.0 * A * y - q * K * y ** (q - 1.0)
    E = phi - A * y * y - D * y - K * y ** q
    return right_far_field(n, A, D, E)


def minimum_truncation(n: float, start: float = 200.0) -> float:
    """
    Smallest L = start * 2^k at which the left correction is below 1% of the leading term
    """
    expansion = left_far_field(n)
    L = float(start)
    while abs(_left_correction(expansion, L)) >= LEFT_CORRECTION_SHARE * L:
        L *= 2.0
    return L


def _left_correction(expansion: FarFieldExpansion, x: float) -> float:
    if expansion.logarithmic:
        return -0.5 * math.log(x)
    return expansion.coefficients["C"] * x ** expansion.exponent


@dataclass
class TouchdownProfile:
    n: float
    mesh: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    dphi: np.ndarray = field(repr=False)
    d2phi: np.ndarray = field(repr=False)
    y_min: float
    kappa: float
    kappa_far: float
    truncation: float
    right_truncation: float
    left: FarFieldExpansion = field(repr=False)
    right: FarFieldExpansion = field(repr=False)
    method: str = "shooting"
    max_residual: float = float("nan")

    @cached_property
    def interpolant(self) -> BPoly:
        return BPoly.from_derivatives(self.mesh, np.column_stack([self.phi, self.dphi, self.d2phi]))

    def evaluate(self, y):
        """
        phi_0(y) in the translated frame: quintic Hermite interpolation on the mesh,
        the fitted far fields beyond it
        """
        y = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y)
        out = np.empty_like(flat)
        lo, hi = self.mesh[0], self.mesh[-1]
        inside = (flat >= lo) & (flat <= hi)
        if np.any(inside):
            out[inside] = self.interpolant(flat[inside])
        if np.any(flat < lo):
            out[flat < lo] = far_field_eval(self.left, flat[flat < lo])[0]
        if np.any(flat > hi):
            out[flat > hi] = far_field_eval(self.right, flat[flat > hi])[0]
        return float(out[0]) if y.ndim == 0 else out.reshape(y.shape)

    def residual(self) -> np.ndarray:
        """
        |phi''' - phi^{-n}| / (1 + phi^{-n}) at the interval midpoints, with phi''' from the
        quintic Hermite interpolant of phi''.

        This is the relative defect near the minimum and the absolute defect of phi''' in the
        tails. It is not |phi^n phi''' - 1|: far right phi''' ~ phi^{-n} falls below what the
        interpolant of phi'' resolves, and that form grows like phi^n there.
        """
        d3 = self.phi ** (-self.n)
        d4 = -self.n * self.phi ** (-self.n - 1.0) * self.dphi
        curvature = BPoly.from_derivatives(self.mesh, np.column_stack([self.d2phi, d3, d4]))
        mid = 0.5 * (self.mesh[1:] + self.mesh[:-1])
        phi_mid = self.interpolant(mid)
        forcing = phi_mid ** (-self.n)
        return np.abs(curvature(mid, 1) - forcing) / (1.0 + forcing)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"y": self.mesh, "phi0": self.phi, "dphi0": self.dphi, "d2phi0": self.d2phi})


def _rhs(n: float):
    def rhs(y, z):
        return [z[1], z[2], abs(z[0]) ** (-n)]
    return rhs


def _integrate(n: float, start: np.ndarray, y0: float, y1: float, mesh: np.ndarray, rtol: float):
    def hits_zero(y, z):
        return z[0]
    hits_zero.terminal = True
    hits_zero.direction = -1

    out = solve_ivp(_rhs(n), (y0, y1), start, method="DOP853", rtol=rtol, atol=1e-20,
                    dense_output=True, events=hits_zero)
    if out.status == 1:
        raise NegativeExcursion(f"phi reached zero at y = {out.t_events[0][0]:.6f}")
    if not out.success:
        raise NoConvergence(f"forward integration failed: {out.message}")
    return out.sol(mesh)


def _collocate(n: float, start: np.ndarray, mesh: np.ndarray, guess: np.ndarray, tol: float,
               max_nodes: int):
    def rhs(y, z):
        return np.vstack([z[1], z[2], np.abs(z[0]) ** (-n)])

    def bc(za, zb):
        return za - start

    sol = solve_bvp(rhs, bc, mesh, guess, tol=tol, max_nodes=max_nodes)
    if not sol.success:
        return None
    return sol.sol(mesh)


def solve_phi0(n: float, L: float = 200.0, tol: float = 1e-10, right_length: Optional[float] = None,
               intervals: int = 16000, left_offset: float = 0.0, method: str = "shooting",
               max_nodes: int = 1000000) -> TouchdownProfile:
    """
    Connecting orbit of phi^n phi''' = 1 on [-L, right_length], translated so that the
    minimizer sits at y = 0. kappa is phi'' at the minimizer and kappa_far = 2A the limiting
    curvature of the quadratic right tail.

    method "shooting" integrates forward from the left expansion with DOP853; "collocation"
    polishes that orbit with scipy's collocation solver and falls back to it on failure.
    """
    if method not in ("shooting", "collocation"):
        raise ValueError(f"unknown method {method!r}")
    left = left_far_field(n, offset=left_offset)
    if abs(_left_correction(left, L)) >= LEFT_CORRECTION_SHARE * L:
        raise ValueError(
            f"L = {L} too short for n = {n}: left correction exceeds {LEFT_CORRECTION_SHARE:.0%} "
            f"of the leading term (use at least {minimum_truncation(n, L)})"
        )
    right_length = L if right_length is None else float(right_length)
    mesh = np.linspace(-L, right_length, intervals + 1)
    start = np.array(far_field_eval(left, -L), dtype=float)
    rtol = min(max(1e-2 * tol, 1e-13), 1e-8)

    values = _integrate(n, start, -L, right_length, mesh, rtol)
    used = "shooting"
    if method == "collocation":
        polished = _collocate(n, start, mesh, values, tol, max_nodes)
        if polished is None:
            logger.warning("collocation for n=%g did not converge; keeping the integrated orbit", n)
        else:
            values, used = polished, "collocation"

    phi, dphi, d2phi = values
    if np.any(phi <= 0):
        raise NegativeExcursion(f"phi reached {phi.min():.3e} on the mesh")

    turn = np.flatnonzero((dphi[:-1] < 0) & (dphi[1:] >= 0))
    if len(turn) == 0:
        raise NoConvergence(f"phi' does not change sign on [-{L}, {right_length}]")
    k = int(turn[0])
    hermite = BPoly.from_derivatives(mesh, np.column_stack([phi, dphi, d2phi]))
    y_min = brentq(lambda y: hermite(y, 1), mesh[k], mesh[k + 1], xtol=1e-15, rtol=1e-15)
    kappa = float(hermite(y_min, 2))
    if not kappa > 0:
        raise NoConvergence(f"phi'' = {kappa:.3e} at the minimizer is not positive")

    shifted = mesh - y_min
    right = fit_right_far_field(n, shifted[-1], phi[-1], dphi[-1], d2phi[-1])
    x_end = -shifted[0]
    offset = phi[0] - x_end - _left_correction(left, x_end)
    left_shifted = FarFieldExpansion(FarFieldSide.LEFT, float(n), {"C": left.coefficients["C"], "B": offset})

    profile = TouchdownProfile(
        n=float(n), mesh=shifted, phi=phi, dphi=dphi, d2phi=d2phi, y_min=float(y_min),
        kappa=kappa, kappa_far=2.0 * right.coefficients["A"], truncation=float(L),
        right_truncation=right_length, left=left_shifted, right=right, method=used,
    )
    profile.max_residual = float(np.max(profile.residual()))
    logger.info("phi0 for n=%g (%s): kappa=%.10f kappa_far=%.10f phi_min=%.6f residual=%.2e",
                n, used, kappa, profile.kappa_far, float(hermite(y_min)), profile.max_residual)
    return profile


def left_tail_exponent(profile: TouchdownProfile, fraction: float = 0.25) -> float:
    """
    Power of the left correction fitted from phi' + 1 ~ x^{p-1} over the outer part of the
    left tail; for n = 3 the logarithmic correction reads as p = 0
    """
    x = -profile.mesh
    cut = profile.mesh[0] * (1.0 - fraction)
    tail = profile.mesh <= cut
    deviation = np.abs(profile.dphi[tail] + 1.0)
    slope = np.polyfit(np.log(x[tail]), np.log(deviation), 1)[0]
    return float(slope + 1.0)
