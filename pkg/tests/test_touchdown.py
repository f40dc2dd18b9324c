import numpy as np
import pytest

from touchdown_lab.touchdown import (
    FarFieldDomainError,
    FarFieldSide,
    far_field_eval,
    left_far_field,
    left_tail_exponent,
    minimum_truncation,
    right_far_field,
    solve_phi0,
)


@pytest.fixture(scope="module")
def profile():
    return solve_phi0(4.0, intervals=4000)


@pytest.fixture(scope="module")
def fine_profile():
    return solve_phi0(4.0, intervals=32000)


def test_profile_is_positive_with_minimum_at_origin(profile):
    assert np.all(profile.phi > 0)
    assert profile.interpolant(0.0, 1) == pytest.approx(0.0, abs=1e-10)
    assert profile.kappa > 0
    assert profile.kappa_far > 0
    assert profile.evaluate(0.0) <= profile.evaluate(np.array([-0.5, 0.5])).min()
    assert profile.method == "shooting"


def test_profile_residual_is_small(profile):
    assert profile.max_residual < 1e-3
    assert profile.residual().shape == (4000,)


def test_tails_follow_far_fields(profile):
    assert profile.dphi[0] == pytest.approx(-1.0, abs=1e-4)
    assert profile.phi[0] == pytest.approx(profile.truncation, rel=1e-3)
    assert profile.d2phi[-1] == pytest.approx(profile.kappa_far, rel=1e-3)


def test_evaluate_continues_into_far_fields(profile):
    lo, hi = profile.mesh[0], profile.mesh[-1]
    assert profile.evaluate(lo - 1e-9) == pytest.approx(profile.evaluate(lo), rel=1e-8)
    assert profile.evaluate(hi + 1e-9) == pytest.approx(profile.evaluate(hi), rel=1e-8)
    far = profile.evaluate(np.array([hi * 10.0]))
    assert far[0] == pytest.approx(0.5 * profile.kappa_far * (hi * 10.0) ** 2, rel=1e-2)


def test_left_tail_exponent(profile):
    assert left_tail_exponent(profile) == pytest.approx(-1.0, abs=0.05)


@pytest.mark.parametrize("n, expected", [(3.0, 0.0), (5.0, -2.0)])
def test_left_tail_exponent_other_n(n, expected):
    other = solve_phi0(n, L=minimum_truncation(n), intervals=8000)
    assert left_tail_exponent(other) == pytest.approx(expected, abs=0.05)


def test_fine_mesh_residual(fine_profile):
    assert fine_profile.max_residual < 1e-8


def test_kappa_is_stable_under_refinement(fine_profile):
    wider = solve_phi0(4.0, L=400.0, right_length=400.0, intervals=128000)
    assert wider.kappa == pytest.approx(fine_profile.kappa, rel=1e-4)


def test_left_far_field_solves_the_ode():
    for n in (3.0, 4.0, 5.0):
        expansion = left_far_field(n)
        y = np.array([-400.0, -300.0])
        step = 1e-2
        second = [far_field_eval(expansion, y + k * step)[2] for k in (-1, 1)]
        third = (second[1] - second[0]) / (2 * step)
        phi = far_field_eval(expansion, y)[0]
        np.testing.assert_allclose(third, phi ** (-n), rtol=5e-2)
    assert left_far_field(3.0).logarithmic


def test_right_far_field_coefficients():
    expansion = right_far_field(4.0, A=0.5)
    assert expansion.side is FarFieldSide.RIGHT
    assert expansion.exponent == -5.0
    assert expansion.coefficients["K"] == pytest.approx(0.5 ** -4 / (-5.0 * -6.0 * -7.0))


def test_far_field_domains():
    with pytest.raises(FarFieldDomainError):
        left_far_field(2.0)
    with pytest.raises(FarFieldDomainError):
        right_far_field(1.5, A=1.0)
    with pytest.raises(FarFieldDomainError):
        right_far_field(4.0, A=0.0)


def test_truncation_length():
    assert minimum_truncation(4.0) == 200.0
    assert minimum_truncation(3.0) == 400.0
    with pytest.raises(ValueError):
        solve_phi0(3.0, L=200.0)
    with pytest.raises(ValueError):
        solve_phi0(4.0, method="spectral")
