import numpy as np
import pytest
from scipy import special

from touchdown_lab.specfun import (
    SERIES_CROSSOVER,
    BesselOverflow,
    bessel_i,
    bessel_i_derivative,
    bessel_i_scaled,
)

POINTS = np.array([0.0, 1e-3, 0.5, 2.0, 5.0, 10.0, 14.9, 15.0, 15.1, 30.0, 100.0, 700.0])


@pytest.mark.parametrize("order", [0, 1, 2])
def test_matches_reference(order):
    np.testing.assert_allclose(bessel_i(order, POINTS), special.iv(order, POINTS), rtol=1e-11, atol=1e-300)


@pytest.mark.parametrize("order", [0, 1, 2])
def test_scaled_matches_reference(order):
    x = np.append(POINTS, [1e3, 1e5])
    np.testing.assert_allclose(bessel_i_scaled(order, x), special.ive(order, x), rtol=1e-11, atol=1e-300)


def test_scalar_in_scalar_out():
    value = bessel_i(0, 1.0)
    assert isinstance(value, float)
    assert value == pytest.approx(1.2660658777520082, rel=1e-14)
    assert bessel_i(1, 0.0) == 0.0


def test_continuity_at_crossover():
    below = bessel_i(1, np.nextafter(SERIES_CROSSOVER, 0.0))
    above = bessel_i(1, np.nextafter(SERIES_CROSSOVER, 100.0))
    assert above == pytest.approx(below, rel=1e-11)


@pytest.mark.parametrize("order", [0, 1, 2])
def test_derivative(order):
    x = np.array([0.3, 3.0, 20.0])
    np.testing.assert_allclose(bessel_i_derivative(order, x), special.ivp(order, x), rtol=1e-11)
    assert bessel_i_derivative(2, 0.0) == 0.0


def test_overflow_and_domain():
    with pytest.raises(BesselOverflow):
        bessel_i(0, 751.0)
    with pytest.raises(ValueError):
        bessel_i(0, -1.0)
    with pytest.raises(ValueError):
        bessel_i(3, 1.0)
    assert np.isfinite(bessel_i_scaled(2, 1e6))
