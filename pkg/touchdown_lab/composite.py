"""
Similarity exponents, matching constants and the composite approximation of v = 1 - u
near infinite-time touchdown.

Stored constants are positive magnitudes; the signs of each regional term are built into
evaluate_composite so that every term is nonnegative.
"""
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

from touchdown_lab.annular import AnnularSolution, taylor_coefficient_b2
from touchdown_lab.model import RadialGrid, RadialState
from touchdown_lab.specfun import bessel_i
from touchdown_lab.touchdown import TouchdownProfile

MATCHING_RTOL = 1e-8


class ExponentDomainError(ValueError):
    pass


class InconsistentMatching(RuntimeError):
    pass


@dataclass(frozen=True)
class Exponents:
    alpha: Fraction
    beta: Fraction
    gamma: Fraction

    def as_floats(self):
        return float(self.alpha), float(self.beta), float(self.gamma)


@dataclass(frozen=True)
class CompositeModel:
    n: float
    epsilon: float
    r_star: float
    mu0: float
    kappa: float
    exponents: Exponents
    c2: float
    a1: float
    b2: float
    J: float
    scale_c: float
    scale_d: float
    phi0: Optional[TouchdownProfile] = field(default=None, repr=False, compare=False)
    annular: Optional[AnnularSolution] = field(default=None, repr=False, compare=False)

    def constants(self) -> Dict[str, float]:
        return {
            "n": self.n, "epsilon": self.epsilon, "r_star": self.r_star, "mu0": self.mu0,
            "kappa": self.kappa, "c2": self.c2, "a1": self.a1, "b2": self.b2, "J": self.J,
            "scale_c": self.scale_c, "scale_d": self.scale_d,
            "alpha": str(self.exponents.alpha), "beta": str(self.exponents.beta),
            "gamma": str(self.exponents.gamma),
        }


@dataclass(frozen=True)
class CompositeError:
    time: float
    max_abs_error: float
    location: float


def exponents(n) -> Exponents:
    """
    alpha = gamma = -1/(2(n-1)), beta = -1/(n-1), exact for rational n
    """
    exact = Fraction(n).limit_denominator(10 ** 6)
    if not exact > 2:
        raise ExponentDomainError(f"similarity exponents need n > 2, got {n}")
    beta = Fraction(-1) / (exact - 1)
    return Exponents(alpha=beta / 2, beta=beta, gamma=beta / 2)


def matching_constants(n: float, epsilon: float, annular: AnnularSolution, kappa: float,
                       phi0: Optional[TouchdownProfile] = None) -> CompositeModel:
    """
    Fix c2 from the curvature identity 2 b2 = kappa c / d^2, then derive a1, J, c and d.
    kappa is the limiting curvature of the quadratic tail of phi0.
    """
    exps = exponents(n)
    mu0, r_star = annular.mu0, annular.r_star
    if not mu0 > 0:
        raise InconsistentMatching(f"mu0 = {mu0:.3e} must be positive to match a minimum")
    if not kappa > 0:
        raise InconsistentMatching(f"kappa = {kappa:.3e} must be positive")

    z = 2.0 * r_star / epsilon
    i1 = bessel_i(1, z)
    i2 = bessel_i(2, z)
    c2 = (mu0 ** (n - 2.0) * r_star * epsilon * i2
          / (2.0 ** (3.0 * n + 1.0) * (n - 1.0) * kappa ** (n - 2.0) * i1 ** (2.0 * n - 1.0))
          ) ** (1.0 / (2.0 * (n - 1.0)))
    a1 = 2.0 * c2 / epsilon * i1
    J = abs(float(exps.alpha)) * c2 * r_star * i2 / (2.0 ** (n + 1.0) * epsilon ** 2)
    scale_c = (J / a1 ** 3) ** (1.0 / (n - 2.0))
    scale_d = (J / a1 ** (n + 1.0)) ** (1.0 / (n - 2.0))
    b2 = taylor_coefficient_b2(annular, epsilon)

    lhs, rhs = 2.0 * b2, kappa * scale_c / scale_d ** 2
    if abs(lhs - rhs) > MATCHING_RTOL * abs(lhs):
        raise InconsistentMatching(f"2 b2 = {lhs:.15e} but kappa c / d^2 = {rhs:.15e}")

    return CompositeModel(
        n=float(n), epsilon=float(epsilon), r_star=r_star, mu0=mu0, kappa=float(kappa),
        exponents=exps, c2=c2, a1=a1, b2=b2, J=J, scale_c=scale_c, scale_d=scale_d,
        phi0=phi0, annular=annular,
    )


def psi0(r, model: CompositeModel):
    """
    Central profile c2 (I0(2 r*/eps) - I0(2 r/eps)) on [0, r*], extended by zero
    """
    r = np.asarray(r, dtype=float)
    inside = np.minimum(r, model.r_star)
    values = model.c2 * (bessel_i(0, 2.0 * model.r_star / model.epsilon)
                         - bessel_i(0, 2.0 * inside / model.epsilon))
    values = np.where(r <= model.r_star, values, 0.0)
    return float(values) if values.ndim == 0 else values


def evaluate_composite(r, t: float, model: CompositeModel):
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    if model.phi0 is None or model.annular is None:
        raise ValueError("composite evaluation needs the touchdown profile and the annular solution")
    r = np.asarray(r, dtype=float)
    alpha, beta, gamma = model.exponents.as_floats()
    offset = r - model.r_star

    eta = offset / (t ** gamma * model.scale_d)
    central = t ** alpha * psi0(r, model)
    inner = t ** beta * model.scale_c * model.phi0.evaluate(eta)
    outer = np.where(offset > 0, 1.0 - model.annular.u_star(r), 0.0)
    overlap_left = model.a1 * t ** alpha * np.maximum(-offset, 0.0)
    overlap_right = model.b2 * np.maximum(offset, 0.0) ** 2
    values = central + inner + outer - overlap_left - overlap_right
    return float(values) if values.ndim == 0 else values


def composite_minimum(model: CompositeModel, t: float, width: float = 50.0):
    """
    (r_min, v_min) of v_comp(., t) searched within width touchdown lengths of r*
    """
    half = width * t ** float(model.exponents.gamma) * model.scale_d
    lo, hi = max(model.r_star - half, 0.0), min(model.r_star + half, 1.0)
    out = minimize_scalar(lambda r: evaluate_composite(r, t, model), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-6 * half})
    return float(out.x), float(out.fun)


def compare_error(model: CompositeModel, snapshot: RadialState) -> CompositeError:
    grid = RadialGrid.for_values(snapshot.values)
    approx = evaluate_composite(grid.nodes, snapshot.time, model)
    deviation = np.abs(snapshot.v - approx)
    k = int(np.argmax(deviation))
    return CompositeError(time=float(snapshot.time), max_abs_error=float(deviation[k]),
                          location=float(grid.nodes[k]))


def composite_curve(model: CompositeModel, times: Iterable[float], r: np.ndarray) -> pd.DataFrame:
    frames = [pd.DataFrame({"t": float(t), "r": r, "v_comp": evaluate_composite(r, t, model)})
              for t in times]
    return pd.concat(frames, ignore_index=True)


def error_report(model: CompositeModel, snapshots: Iterable[RadialState]) -> Dict[str, List]:
    """
    Composite error at each snapshot time plus ratios of consecutive errors
    """
    errors = [compare_error(model, s) for s in sorted(snapshots, key=lambda s: s.time)]
    ratios = [a.max_abs_error / b.max_abs_error if b.max_abs_error > 0 else float("inf")
              for a, b in zip(errors, errors[1:])]
    return {
        "errors": [{"time": e.time, "max_abs_error": e.max_abs_error, "location": e.location}
                   for e in errors],
        "ratios": ratios,
    }
