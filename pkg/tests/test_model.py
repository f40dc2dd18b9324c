import math

import numpy as np
import pytest

from touchdown_lab.model import (
    MobilityDomainError,
    MobilityVariant,
    ModelParams,
    RadialGrid,
    RadialState,
    free_energy_curvature,
    free_energy_terms,
    initial_mass,
    initial_profile,
    mobility,
    mobility_derivative,
)


@pytest.mark.parametrize("variant, expected", [
    (MobilityVariant.PLAIN, -0.009261),
    (MobilityVariant.TRUNCATED, 0.0),
    (MobilityVariant.ABSOLUTE, 0.009261),
])
def test_mobility_variants_outside_unit_interval(variant, expected):
    params = ModelParams(n=3.0, mobility_variant=variant)
    assert float(mobility(1.1, params)) == pytest.approx(expected, abs=1e-12)


def test_mobility_vanishes_at_pure_phases():
    for variant in MobilityVariant:
        params = ModelParams(n=4.0, mobility_variant=variant)
        np.testing.assert_array_equal(mobility(np.array([-1.0, 1.0]), params), [0.0, 0.0])


def test_constant_mobility_for_zero_exponent():
    params = ModelParams(n=0.0)
    u = np.linspace(-1.2, 1.2, 7)
    np.testing.assert_array_equal(mobility(u, params), np.ones_like(u))
    np.testing.assert_array_equal(mobility_derivative(u, params), np.zeros_like(u))


def test_plain_mobility_rejects_non_integer_exponent_outside_bounds():
    params = ModelParams(n=2.5)
    with pytest.raises(MobilityDomainError):
        mobility(np.array([0.0, 1.01]), params)


def test_mobility_derivative_matches_difference_quotient():
    params = ModelParams(n=4.0)
    u = np.linspace(-0.9, 0.9, 11)
    step = 1e-6
    numeric = (mobility(u + step, params) - mobility(u - step, params)) / (2 * step)
    np.testing.assert_allclose(mobility_derivative(u, params), numeric, rtol=1e-7, atol=1e-10)


def test_free_energy_terms():
    f, f_prime = free_energy_terms(np.array([-1.0, 0.0, 1.0, 0.5]))
    np.testing.assert_allclose(f, [0.0, 0.5, 0.0, 0.28125])
    np.testing.assert_allclose(f_prime, [0.0, 0.0, 0.0, -0.75])
    np.testing.assert_allclose(free_energy_curvature(np.array([0.0, 1.0])), [-2.0, 4.0])


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(epsilon=0.0)
    with pytest.raises(ValueError):
        ModelParams(n=-1.0)
    assert ModelParams(mobility_variant="absolute").mobility_variant is MobilityVariant.ABSOLUTE


def test_grid_layout():
    grid = RadialGrid(10)
    assert grid.spacing == pytest.approx(0.1)
    assert len(grid.nodes) == 11
    assert grid.nodes[-1] == pytest.approx(1.0)
    np.testing.assert_allclose(grid.half_nodes[:2], [0.05, 0.15])
    assert RadialGrid.for_values(np.zeros(11)) == grid
    with pytest.raises(ValueError):
        RadialGrid(1)


def test_state_validation():
    with pytest.raises(ValueError):
        RadialState(time=-1.0, values=np.zeros(5))
    with pytest.raises(ValueError):
        RadialState(time=0.0, values=np.zeros((2, 3)))
    state = RadialState(time=0.0, values=np.array([1.2, 0.0, -0.5]))
    assert state.exceeds_bounds
    np.testing.assert_allclose(state.v, [-0.2, 1.0, 1.5])


def test_initial_profile_shape():
    state = initial_profile(RadialGrid(200), 0.1)
    assert state.time == 0.0
    assert state.values[0] == pytest.approx(0.95 * math.tanh(5.0))
    assert state.values[100] == pytest.approx(0.0, abs=1e-15)
    assert np.all(np.diff(state.values) < 0)


def test_initial_profile_is_flat_at_the_ends():
    grid = RadialGrid(400)
    u = initial_profile(grid, 0.05).values
    h = grid.spacing
    assert abs(u[1] - u[0]) / h < 1e-5
    assert abs(u[-1] - u[-2]) / h < 1e-5


def test_flat_ends_clamps_endpoints():
    u = initial_profile(RadialGrid(50), 0.1, flat_ends=True).values
    assert u[0] == 0.95
    assert u[-1] == -0.95


def test_initial_mass_close_to_sharp_interface_value():
    eps = 0.1
    m0 = initial_mass(eps)
    assert m0 == pytest.approx(-0.95 * (0.25 - math.pi ** 2 * eps ** 2 / 12.0), abs=1e-4)
