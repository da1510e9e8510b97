import math
import os
import tempfile

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besseldet.errors import DomainError, UnsupportedVariantError
from besseldet.weights import (Fermi, Step, Table, Zero, eval_sigma, eval_sigma_deriv,
                               integrate_dsigma, read_table_csv, riemann_liouville,
                               rl_derivative_order, sigma_from_v0, stieltjes_rule,
                               write_table_csv)


def poly_exp(mu):
    """M_mu of l^2 e^(-l) in closed form, valid for every real mu."""
    return lambda t: math.exp(-t) * (t * t + 2 * mu * t + mu * (mu + 1))


# --- variants ----------------------------------------------------------------

def test_fermi_values_and_derivative():
    f = Fermi(0.5, 3.0)
    assert eval_sigma(f, 0.5) == 0.5
    assert eval_sigma(f, 1e3) == 0.0 or eval_sigma(f, 1e3) < 1e-300
    r = np.linspace(-3, 3, 41)
    h = 1e-6
    fd = (f.sigma(r + h) - f.sigma(r - h)) / (2 * h)
    assert np.max(np.abs(eval_sigma_deriv(f, r) - fd)) < 1e-8


def test_fermi_no_overflow():
    f = Fermi(0.0, 50.0)
    assert np.all(np.isfinite(f.sigma(np.array([-1e4, 1e4]))))


def test_fermi_rejects_bad_slope():
    with pytest.raises(DomainError):
        Fermi(0.0, 0.0)


def test_step_levels_and_jumps():
    s = Step((1.0, 2.0), (0.0, 0.5))
    assert list(s.sigma([0.0, 1.0, 1.5, 2.0, 3.0])) == [1.0, 0.5, 0.5, 0.0, 0.0]
    assert s.jumps() == [(1.0, -0.5), (2.0, -0.5)]
    assert s.generating_function_valid
    assert not Step((1.0, 2.0), (0.3, 0.3)).generating_function_valid
    assert not Step((1.0,), (1.5,)).in_unit_interval


@pytest.mark.parametrize("args", [((), ()), ((2.0, 1.0), (0.0, 0.0)), ((1.0,), (0.1, 0.2))])
def test_step_validation(args):
    with pytest.raises(DomainError):
        Step(*args)


def test_pointwise_derivative_unsupported_for_step_and_zero():
    with pytest.raises(UnsupportedVariantError):
        eval_sigma_deriv(Step((1.0,), (0.0,)), 0.5)
    with pytest.raises(UnsupportedVariantError):
        eval_sigma_deriv(Zero(), 0.5)


def test_table_interpolation_and_tail():
    nodes = np.linspace(0, 2, 21)
    tab = Table(nodes, np.exp(-nodes), 1.0)
    assert tab.sigma(0.0) == 1.0
    assert tab.sigma(-5.0) == 1.0
    assert tab.sigma(3.0) == pytest.approx(math.exp(-3.0), rel=1e-12)
    assert abs(float(tab.sigma(0.73)) - math.exp(-0.73)) < 1e-4


@pytest.mark.parametrize("bad", [
    dict(nodes=[0.0], values=[1.0]),
    dict(nodes=[1.0, 0.0], values=[1.0, 1.0]),
    dict(nodes=[0.0, 1.0], values=[1.0, float("nan")]),
    dict(nodes=[0.0, 1.0], values=[1.0, 1.0], decay_exponent=0.0),
])
def test_table_validation(bad):
    with pytest.raises(DomainError):
        Table(np.asarray(bad["nodes"]), np.asarray(bad["values"]), bad.get("decay_exponent", 1.0))


@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(-2, 2, allow_nan=False), min_size=2, max_size=12),
       decay=st.floats(0.1, 10.0))
def test_table_csv_round_trip(vals, decay):
    nodes = np.cumsum(np.full(len(vals), 0.25))
    tab = Table(nodes, np.array(vals), decay)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "w.csv")
        write_table_csv(tab, path)
        back = read_table_csv(path)
    assert np.array_equal(back.nodes, tab.nodes)
    assert np.array_equal(back.values, tab.values)
    assert back.decay_exponent == tab.decay_exponent


def test_table_csv_requires_decay_header(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("node,value\n0,1\n1,0.5\n")
    with pytest.raises(DomainError):
        read_table_csv(p)


# --- Stieltjes integrals ---------------------------------------------------------

def test_stieltjes_fermi_against_mpmath():
    f = Fermi(1.0, 2.0)
    t = -0.5
    mp.mp.dps = 25
    ref = mp.quad(lambda r: mp.cos(r) * (-2 * mp.exp(2 * (r - 1)) / (1 + mp.exp(2 * (r - 1))) ** 2),
                  [t, 1, mp.inf])
    assert integrate_dsigma(f, np.cos, t) == pytest.approx(float(ref), abs=1e-11)


def test_stieltjes_step_is_sum_of_atoms():
    s = Step((1.0, 2.0), (0.0, 0.5))
    h = lambda r: r * r  # noqa: E731
    assert integrate_dsigma(s, h, 0.0) == pytest.approx(-0.5 * 1 - 0.5 * 4, abs=1e-15)
    # breaks at or below t are excluded
    assert integrate_dsigma(s, h, 1.0) == pytest.approx(-0.5 * 4, abs=1e-15)


def test_stieltjes_zero():
    assert integrate_dsigma(Zero(), np.cos, 0.0) == 0.0


def test_stieltjes_total_mass_is_minus_sigma_t():
    # int_t^inf d sigma = -sigma(t) for weights vanishing at infinity
    f = Fermi(0.3, 1.5)
    for t in (-2.0, 0.0, 1.0):
        assert integrate_dsigma(f, lambda r: 1.0, t) == pytest.approx(-float(f.sigma(t)), abs=1e-11)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), t=st.floats(-2, 2))
def test_integrate_dsigma_linear(a, b, t):
    f = Fermi(0.2, 1.7)
    h1, h2 = np.cos, lambda r: np.exp(-0.1 * r * r)
    lhs = integrate_dsigma(f, lambda r: a * h1(r) + b * h2(r), t)
    rhs = a * integrate_dsigma(f, h1, t) + b * integrate_dsigma(f, h2, t)
    assert abs(lhs - rhs) <= 1e-9 * (1 + abs(a) + abs(b))


def test_stieltjes_rule_matches_adaptive():
    f = Fermi(0.5, 2.0)
    h = lambda r: np.cos(np.sqrt(np.maximum(r + 1.0, 0.0)))  # noqa: E731
    nodes, w = stieltjes_rule(f, -1.0, 80)
    assert float(np.sum(w * h(nodes))) == pytest.approx(integrate_dsigma(f, h, -1.0), abs=1e-10)


# --- Riemann-Liouville ---------------------------------------------------------------

def test_rl_order_rule():
    assert rl_derivative_order(-1.0) == 2
    assert rl_derivative_order(-0.4) == 1
    assert rl_derivative_order(-1.6) == 3
    assert rl_derivative_order(0.0) == 1


@pytest.mark.parametrize("mu", [1.0, 0.5, 0.0, -0.5, -1.0, -1.5, -2.3])
def test_rl_closed_form(mu):
    f = lambda lam: lam * lam * math.exp(-lam)  # noqa: E731
    for t in (-0.5, 0.0, 1.2):
        assert riemann_liouville(mu, f, t) == pytest.approx(poly_exp(mu)(t), abs=1e-8)


def test_rl_against_mpmath_quad():
    f = lambda lam: math.exp(-lam * lam)  # noqa: E731
    mu, t = 0.7, 0.3
    ref = mp.quad(lambda l: (l - t) ** (mu - 1) * mp.exp(-l * l), [t, t + 1, mp.inf]) / mp.gamma(mu)
    assert riemann_liouville(mu, f, t) == pytest.approx(float(ref), abs=1e-11)


def test_rl_analytic_derivatives():
    f = lambda lam: math.exp(-2 * lam)  # noqa: E731
    derivs = {k: (lambda k: lambda lam: (-2) ** k * math.exp(-2 * lam))(k) for k in range(1, 4)}
    for mu in (-0.5, -1.0, -2.5):
        val = riemann_liouville(mu, f, 0.4, derivs=derivs)
        assert val == pytest.approx(2.0 ** (-mu) * math.exp(-0.8), rel=1e-11)


def test_rl_semigroup():
    f = lambda lam: lam * lam * math.exp(-lam)  # noqa: E731
    a, b, t = 0.6, 0.8, 0.2
    inner = lambda s: riemann_liouville(b, f, s, tol=1e-11)  # noqa: E731
    assert riemann_liouville(a, inner, t, tol=1e-10) == pytest.approx(poly_exp(a + b)(t), abs=1e-7)


def test_rl_inversion():
    f = lambda lam: lam * lam * math.exp(-lam)  # noqa: E731
    inner = lambda s: riemann_liouville(0.5, f, s)  # noqa: E731
    assert riemann_liouville(-0.5, inner, 0.7) == pytest.approx(f(0.7), abs=1e-7)


@settings(max_examples=20, deadline=None)
@given(mu=st.floats(-2.4, 2.0), t=st.floats(-1.0, 2.0))
def test_rl_property_closed_form(mu, t):
    if abs(mu) < 1e-3:
        mu = 0.0
    f = lambda lam: lam * lam * math.exp(-lam)  # noqa: E731
    assert abs(riemann_liouville(mu, f, t) - poly_exp(mu)(t)) <= 1e-7


# --- sigma from v0 ----------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.0, 0.5, -0.5])
def test_sigma_from_exponential(alpha):
    tab = sigma_from_v0(lambda t: math.exp(-t), alpha, lo=-1.0)
    pref = 2.0 ** (2 * alpha + 1) * math.gamma(alpha + 1)
    r = np.array([-1.0, -0.3, 0.0, 0.77, 2.5, 10.0])
    assert np.max(np.abs(tab.sigma(r) - pref * np.exp(-r))) < 1e-7 * pref * math.e
    assert tab.decay_exponent == pytest.approx(1.0, rel=1e-6)


def test_sigma_from_zero_input():
    tab = sigma_from_v0(lambda t: 0.0 * t, 0.0, lo=-1.0, hi=1.0)
    assert np.all(tab.values == 0)
