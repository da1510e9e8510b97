import math

import numpy as np
import pytest

from besseldet.errors import DomainError
from besseldet.fredholm import log_det_lattice
from besseldet.kernel import KernelFamily
from besseldet.painleve import solve_tw, tw_log_det
from besseldet.specfun import bessel_j
from besseldet.sturm import (RangeError, build_potential, solve_bvp_f,
                             solve_bvp_family, trivial_potential, verify_f_t_equation, verify_idpv,
                             verify_integral_rep, verify_nonlocal)
from besseldet.weights import Fermi, Step, Zero

FERMI = Fermi(0.0, 1.0)


@pytest.fixture(scope="module")
def fermi_potential():
    return build_potential(KernelFamily(0.0, FERMI, 1.0, 0.0), 2.1, 0.0)


def bessel_f(alpha, x, k):
    return np.sqrt(x) * bessel_j(alpha, x * k)


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 0.5, 1.3])
@pytest.mark.parametrize("lam, t", [(1.0, 0.0), (4.0, 0.5), (2.0, -1.0)])
def test_zero_weight_gives_bessel(alpha, lam, t):
    sol = solve_bvp_f(None, alpha, lam, t, 3.0)
    ref = bessel_f(alpha, sol.x_samples, math.sqrt(lam - t))
    assert np.max(np.abs(sol.f_values - ref)) <= 1e-8


def test_half_order_closed_form():
    sol = solve_bvp_f(None, 0.5, 1.7, 0.7, 5.0)
    assert np.max(np.abs(sol.f_values - math.sqrt(2 / math.pi) * np.sin(sol.x_samples))) <= 1e-8
    assert np.max(np.abs(sol.f_prime_values - math.sqrt(2 / math.pi) * np.cos(sol.x_samples))) <= 1e-8


def test_fermi_solution_self_consistent(fermi_potential):
    a = solve_bvp_f(fermi_potential, 0.0, 1.0, 0.0, 2.0)
    b = solve_bvp_f(fermi_potential, 0.0, 1.0, 0.0, 2.0, rtol=5e-11)
    assert np.all(np.isfinite(a.f_values))
    assert np.max(np.abs(a.f_values - b.f_values)) <= 1e-7


def test_boundary_compliance(fermi_potential):
    x = 1e-3
    for pot, tol in ((trivial_potential(0.0, 0.0), 1e-6), (fermi_potential, 1e-4)):
        fam = solve_bvp_family(pot, [1.0, 3.0], 2.0)
        ratio = fam.f(x) / bessel_f(0.0, x, np.sqrt([1.0, 3.0]))
        assert np.max(np.abs(ratio - 1)) <= tol


def test_launch_insensitivity(fermi_potential):
    a = solve_bvp_family(fermi_potential, [0.5, 2.0], 2.0)
    b = solve_bvp_family(fermi_potential, [0.5, 2.0], 2.0, x0=a.x0 / 2)
    xs = np.linspace(0.1, 2.0, 20)
    assert np.max(np.abs(a.f(xs) - b.f(xs))) <= 1e-7


def test_implicit_rerun_agrees(fermi_potential):
    a = solve_bvp_family(fermi_potential, [1.0, 2.0], 2.0)
    b = solve_bvp_family(fermi_potential, [1.0, 2.0], 2.0, method="Radau")
    xs = np.linspace(0.05, 2.0, 30)
    assert np.max(np.abs(a.f(xs) - b.f(xs))) <= 1e-7


def test_lambda_continuity(fermi_potential):
    lams = np.linspace(1.0, 1.1, 11)
    fam = solve_bvp_family(fermi_potential, lams, 2.0)
    steps = np.abs(np.diff(fam.f(1.5)))
    assert np.max(steps) < 0.05 and np.max(np.abs(np.diff(steps))) < 1e-3


def test_bvp_errors(fermi_potential):
    with pytest.raises(DomainError):
        solve_bvp_f(None, 0.0, 1.0, 1.0, 1.0)
    with pytest.raises(RangeError):
        solve_bvp_family(fermi_potential, [1.0], 5.0)
    with pytest.raises(RangeError):
        fermi_potential.p(10.0)


def test_csv(tmp_path):
    sol = solve_bvp_f(None, 0.0, 1.0, 0.0, 1.0, n_samples=5)
    p = tmp_path / "f.csv"
    sol.to_csv(p)
    assert open(p).readline().strip() == "x,f,f_prime"


# --- identities -----------------------------------------------------------------------

def test_nonlocal_zero_weight():
    assert verify_nonlocal(KernelFamily(0.0, Zero(), 1.0, 0.0), 1.0) == pytest.approx(0.0, abs=1e-12)


def test_nonlocal_fermi():
    assert abs(verify_nonlocal(KernelFamily(0.0, FERMI, 1.0, 0.0), 1.0)) <= 1e-4


def test_nonlocal_step():
    assert abs(verify_nonlocal(KernelFamily(0.0, Step((1.0,), (0.5,)), 1.0, 0.0), 1.0)) <= 1e-4


def test_integral_rep_zero_weight():
    assert verify_integral_rep(KernelFamily(0.0, Zero(), 1.0, 0.0), 1.0) == 0.0


def test_integral_rep_fermi():
    fam = KernelFamily(0.0, FERMI, 1.0, 0.0)
    logF = float(log_det_lattice(fam, [1.0], [0.0])[0][0, 0])
    assert abs(verify_integral_rep(fam, 1.0)) <= 1e-4 * abs(logF) + 1e-6


def test_integral_rep_step_matches_tracy_widom():
    s = 0.5
    fam = KernelFamily(0.0, Step((1.0,), (s,)), 1.0, 0.0)
    logF = float(log_det_lattice(fam, [1.5], [0.0])[0][0, 0])
    res = verify_integral_rep(fam, 1.5)
    tw = solve_tw(0.0, s, 1.5**2)
    # both reproduce the same log F(1.5, 0)
    assert abs(res) <= 1e-4 * abs(logF) + 1e-6
    assert abs(tw_log_det(tw, 1.5**2) - logF) <= 1e-4


def test_f_t_zero_weight():
    fam = KernelFamily(0.5, Zero(), 1.0, 0.0)
    assert abs(verify_f_t_equation(fam, 0.5, 2.0, 0.0, 1.0, h_t=0.01, order=4)) <= 1e-8


def test_f_t_fermi_and_order():
    fam = KernelFamily(0.0, FERMI, 1.0, 0.0)
    r1 = abs(verify_f_t_equation(fam, 0.0, 2.0, 0.0, 1.0, h_t=0.05))
    r2 = abs(verify_f_t_equation(fam, 0.0, 2.0, 0.0, 1.0, h_t=0.025))
    assert r1 <= 1e-3
    assert r2 * 3 <= r1


def test_f_t_guards():
    fam = KernelFamily(0.0, FERMI, 1.0, 0.0)
    with pytest.raises(DomainError):
        verify_f_t_equation(fam, 0.0, 0.02, 0.0, 1.0)
    with pytest.raises(DomainError):
        verify_f_t_equation(fam, 0.0, 2.0, 0.0, 1.0, h_t=0.1)


def test_idpv_zero_weight():
    assert verify_idpv(KernelFamily(0.0, Zero(), 1.0, 0.0), 0.0, 1.0) <= 1e-8
    assert verify_idpv(KernelFamily(1.5, Zero(), 1.0, 0.0), 1.5, 2.0) <= 1e-8


def test_idpv_fermi():
    assert verify_idpv(KernelFamily(0.0, FERMI, 1.0, 0.0), 0.0, 1.0) <= 1e-3


def test_idpv_requires_t_zero():
    with pytest.raises(DomainError):
        verify_idpv(KernelFamily(0.0, FERMI, 1.0, 0.5), 0.0, 1.0)


def test_idpv_step_reduces_to_tracy_widom():
    s, X = 0.5, 2.0
    fam = KernelFamily(0.0, Step((1.0,), (s,)), 1.0, 0.0)
    res, (g, g1, g2) = verify_idpv(fam, 0.0, X, lams=(1.0,), return_all=True)
    c = math.sqrt(1 - s)
    q, qp, qpp = c * g[0], c * g1[0], c * g2[0]
    # TW equation in x: x q (1 - q^2)(x q q')' + x (1 - q^2)^2 ((x q')' + q/4) + x^2 q (q q')^2 - alpha^2 q/4
    xqq_p = q * qp + X * qp * qp + X * q * qpp
    tw_res = (X * q * (1 - q * q) * xqq_p + X * (1 - q * q) ** 2 * (qp + X * qpp + q / 4)
              + X * X * q * (q * qp) ** 2)
    assert abs(c * res[0] - tw_res) <= 1e-6
    assert abs(tw_res) <= 1e-4
    tw = solve_tw(0.0, s, X)
    assert abs(tw.q_at(X)[0] - q) <= 1e-5
