import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besseldet.errors import DomainError
from besseldet.specfun import (SWITCH_POINT, BesselOrder, bessel_j, bessel_j_deriv,
                               bessel_zj_deriv, gamma, rgamma)

mp.mp.dps = 30


def mp_j(nu, z):
    return float(mp.besselj(nu, z))


# --- gamma -------------------------------------------------------------------

@pytest.mark.parametrize("x, expected", [(1.0, 1.0), (0.5, 1.7724538509055160), (5.0, 24.0)])
def test_gamma_examples(x, expected):
    assert gamma(x) == pytest.approx(expected, rel=1e-14)


def test_gamma_relative_error_against_mpmath():
    xs = np.concatenate([np.linspace(0.01, 50, 997), [1e-3, 0.3, 2.5, 17.25, 49.9]])
    ours = gamma(xs)
    ref = np.array([float(mp.gamma(x)) for x in xs])
    assert np.max(np.abs(ours / ref - 1)) <= 1e-13


def test_gamma_reflection_for_negative_arguments():
    xs = np.array([-0.5, -1.5, -2.3, -3.7, -0.01])
    ref = np.array([float(mp.gamma(x)) for x in xs])
    assert np.max(np.abs(gamma(xs) / ref - 1)) <= 1e-13


@pytest.mark.parametrize("pole", [0.0, -1.0, -4.0])
def test_gamma_poles_raise(pole):
    with pytest.raises(DomainError):
        gamma(pole)
    assert rgamma(pole) == 0.0


# --- BesselOrder ---------------------------------------------------------------

@pytest.mark.parametrize("bad", [-1.0, -1.5, float("nan"), float("inf")])
def test_order_rejects_outside_domain(bad):
    with pytest.raises(DomainError):
        BesselOrder(bad)


def test_order_accepts_valid():
    assert BesselOrder(-0.99).alpha == -0.99


# --- bessel_j ---------------------------------------------------------------------

def test_bessel_examples():
    assert bessel_j(0, 0.0) == 1.0
    assert abs(bessel_j(0.5, math.pi)) <= 1e-15
    assert abs(bessel_j(0, 2.404825557695773)) <= 1e-10


def test_first_zero_from_independent_series():
    # root of a 200-term mpmath power series, found by bisection
    def series(z):
        return mp.nsum(lambda k: (-1) ** k * (z / 2) ** (2 * k) / mp.factorial(k) ** 2, [0, 200])
    root = mp.findroot(series, 2.4)
    assert abs(float(root) - 2.404825557695773) <= 1e-14
    assert abs(bessel_j(0, float(root))) <= 1e-10


@pytest.mark.parametrize("nu", [-0.9, -0.5, -0.3, 0.0, 0.5, 1.0, 1.3, 2.0, 3.7, 5.0])
def test_bessel_absolute_error_against_mpmath(nu):
    z = np.concatenate([np.linspace(0.05, 30, 300), np.linspace(30, 400, 200)])
    ref = np.array([mp_j(nu, v) for v in z])
    assert np.max(np.abs(bessel_j(nu, z) - ref)) <= 1e-12


def test_bessel_near_zero_orders():
    z = np.array([1e-8, 1e-4, 0.01, 0.1])
    for nu in (0.0, 0.7, 2.0):
        ref = np.array([mp_j(nu, v) for v in z])
        assert np.max(np.abs(bessel_j(nu, z) - ref)) <= 1e-15


def test_shifted_negative_order_reachable():
    # alpha - 1 for alpha in (-1, 0) lies in (-2, -1); accurate away from the origin
    for nu in (-1.3, -1.0, -1.7):
        z = np.linspace(0.5, 50, 50)
        ref = np.array([mp_j(nu, v) for v in z])
        assert np.max(np.abs(bessel_j(nu, z) - ref)) <= 1e-11


def test_negative_z_rejected():
    with pytest.raises(DomainError):
        bessel_j(0.0, -1.0)


def test_scalar_and_shape():
    assert isinstance(bessel_j(0.0, 1.0), float)
    assert bessel_j(0.0, np.ones((2, 3))).shape == (2, 3)


@pytest.mark.parametrize("nu", [0.0, 0.5, 1.3])
def test_recurrence_residual(nu):
    z = np.linspace(0.01, 50, 2000)
    jm = bessel_j(nu - 1, z, branch="series") if nu - 1 != -1.0 else -bessel_j(1.0, z)
    res = jm + bessel_j(nu + 1, z) - (2 * nu / z) * bessel_j(nu, z)
    # the independent series route for J_{nu-1} is only trustworthy below the switch point
    mask = z < SWITCH_POINT
    assert np.max(np.abs(res[mask])) <= 1e-10
    res_full = bessel_j(nu - 1, z) + bessel_j(nu + 1, z) - (2 * nu / z) * bessel_j(nu, z)
    assert np.max(np.abs(res_full)) <= 1e-10


@pytest.mark.parametrize("nu", np.linspace(-0.9, 5.0, 13))
def test_branch_agreement_at_switch_point(nu):
    z = np.array([SWITCH_POINT])
    a = bessel_j(nu, z, branch="series")
    b = bessel_j(nu, z, branch="asymptotic")
    assert abs(a[0] - b[0]) <= 1e-11


def test_continuity_small_steps():
    z = np.linspace(0.1, 100, 500)
    for nu in (0.0, 0.5, 1.3):
        diff = np.abs(bessel_j(nu, z + 1e-8) - bessel_j(nu, z))
        assert np.max(diff) <= 2e-8


@settings(max_examples=60, deadline=None)
@given(nu=st.floats(-0.95, 6.0), z=st.floats(0.0, 400.0))
def test_bessel_bounded_and_matches_mpmath(nu, z):
    if nu < 0 and z < 1e-3:
        return
    val = bessel_j(nu, z)
    assert abs(val - mp_j(nu, z)) <= 1e-12 * max(1.0, abs(mp_j(nu, z)))


# --- derivatives ------------------------------------------------------------------------

def test_derivative_examples():
    assert bessel_j_deriv(3, 0.0) == 0.0
    assert bessel_j_deriv(0, 1.0) == pytest.approx(-bessel_j(1, 1.0), abs=1e-15)
    h = 1e-5
    fd = (bessel_j(0.7, 3 + h) - bessel_j(0.7, 3 - h)) / (2 * h)
    assert abs(bessel_j_deriv(0.7, 3.0) - fd) <= 1e-7


def test_derivative_against_mpmath():
    z = np.linspace(0.01, 400, 800)
    for nu in (0.0, 0.3, 1.0, 2.5):
        ref = np.array([float(mp.besselj(nu, v, derivative=1)) for v in z])
        assert np.max(np.abs(bessel_j_deriv(nu, z) - ref)) <= 1e-11


def test_derivative_at_origin():
    assert bessel_j_deriv(1, 0.0) == 0.5
    assert bessel_j_deriv(0, 0.0) == 0.0
    with pytest.raises(DomainError):
        bessel_j_deriv(0.5, 0.0)


def test_zj_deriv_finite_at_origin():
    assert bessel_zj_deriv(0.5, 0.0) == 0.0
    z = 2.0
    assert bessel_zj_deriv(0.4, z) == pytest.approx(z * bessel_j_deriv(0.4, z), abs=1e-14)
