"""
Modified Bessel functions of the first kind I_0, I_1 and I_2 for real x >= 0.

Power series below the crossover, Hankel asymptotic expansion with optimal
truncation above it. bessel_i_scaled returns e^{-x} I_nu(x) and never overflows.
"""
import math
from enum import IntEnum

import numpy as np

SERIES_CROSSOVER = 15.0
OVERFLOW_LIMIT = 750.0

_SERIES_TERMS = 80
_ASYMPTOTIC_TERMS = 60


class BesselOrder(IntEnum):
    I0 = 0
    I1 = 1
    I2 = 2


class BesselOverflow(OverflowError):
    """Raised when I_nu(x) is not representable as a double."""


def _as_order(order) -> BesselOrder:
    try:
        return BesselOrder(int(order))
    except (ValueError, TypeError):
        raise ValueError(f"Bessel order must be 0, 1 or 2, got {order!r}") from None


def _series(nu: int, x: np.ndarray) -> np.ndarray:
    # sum_k (x/2)^{2k+nu} / (k! (k+nu)!), all terms positive
    half = 0.5 * x
    q = half * half
    term = half ** nu / math.factorial(nu)
    total = term.copy()
    for k in range(_SERIES_TERMS):
        term = term * q / ((k + 1) * (k + 1 + nu))
        total = total + term
    return total


def _asymptotic_sum(nu: int, x: np.ndarray) -> np.ndarray:
    # sum_k (-1)^k a_k(nu) / x^k, truncated before the smallest term
    four_nu2 = 4.0 * nu * nu
    total = np.ones_like(x)
    term = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _ASYMPTOTIC_TERMS + 1):
        new = -term * (four_nu2 - (2 * k - 1) ** 2) / (8.0 * k * x)
        active &= np.abs(new) < np.abs(term)
        total = total + np.where(active, new, 0.0)
        term = np.where(active, new, term)
    return total


def _evaluate(order, x, scaled: bool):
    nu = int(_as_order(order))
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("Bessel argument must be nonnegative")
    flat = np.atleast_1d(arr)
    out = np.empty_like(flat)

    low = flat <= SERIES_CROSSOVER
    if np.any(low):
        values = _series(nu, flat[low])
        out[low] = values * np.exp(-flat[low]) if scaled else values
    high = ~low
    if np.any(high):
        xs = flat[high]
        scaled_values = _asymptotic_sum(nu, xs) / np.sqrt(2.0 * math.pi * xs)
        if scaled:
            out[high] = scaled_values
        else:
            with np.errstate(over="ignore"):
                out[high] = np.exp(xs) * scaled_values

    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def bessel_i(order, x):
    """
    I_nu(x) for nu in {0, 1, 2} and 0 <= x <= 750, relative accuracy about 1e-13.
    Accepts scalars or arrays.
    """
    if np.any(np.asarray(x, dtype=float) > OVERFLOW_LIMIT):
        raise BesselOverflow(f"I_{int(order)}(x) requested beyond x = {OVERFLOW_LIMIT}")
    result = _evaluate(order, x, scaled=False)
    if not np.all(np.isfinite(result)):
        raise BesselOverflow(f"I_{int(order)}(x) overflows double precision")
    return result


def bessel_i_scaled(order, x):
    """
    e^{-x} I_nu(x), defined for every x >= 0
    """
    return _evaluate(order, x, scaled=True)


def bessel_i_derivative(order, x):
    """
    d/dx I_nu(x): I_0' = I_1, I_1' = (I_0 + I_2)/2, I_2' = I_1 - 2 I_2 / x (zero at x = 0)
    """
    nu = _as_order(order)
    if nu is BesselOrder.I0:
        return bessel_i(1, x)
    if nu is BesselOrder.I1:
        return 0.5 * (bessel_i(0, x) + bessel_i(2, x))
    arr = np.asarray(x, dtype=float)
    i1 = bessel_i(1, arr)
    i2 = bessel_i(2, arr)
    with np.errstate(divide="ignore", invalid="ignore"):
        result = np.where(arr > 0, i1 - 2.0 * i2 / np.where(arr > 0, arr, 1.0), 0.0)
    return float(result) if result.ndim == 0 else result
