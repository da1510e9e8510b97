"""The Schrodinger boundary value problem for f(x; lambda, t) and the identities built on it.

    -f_xx + 2 v_x f = lambda f,     f ~ sqrt(x) J_alpha(x sqrt(lambda - t))  (x -> 0+)

with 2 v_x = t + (4 alpha^2 - 1)/(4 x^2) + p(x), p = -2 d^2/dx^2 log F.

Integration variable is tau = log x with f = x^(alpha + 1/2) w; then

    w_tautau = -2 alpha w_tau + x^2 (t - lambda + p(x)) w,

the inverse-square term cancelling exactly (beta^2 - beta = alpha^2 - 1/4 for
beta = alpha + 1/2).  w tends to a constant at x = 0, so the launch data is well scaled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from . import _fd
from .errors import AccuracyError, DomainError, NumericError
from .fredholm import DEFAULT_NODES, log_det_lattice, v_field
from .kernel import KernelFamily
from .specfun import BesselOrder, bessel_j
from .weights import WeightSpec, Zero, stieltjes_rule

LAUNCH_X0 = 1e-5
BVP_RTOL = 1e-10
POTENTIAL_STEP = 0.01
LAMBDA_START = 33
LAMBDA_TOL = 1e-8
FT_MIN_GAP = 0.05


class RangeError(DomainError):
    """Potential requested outside its tabulated range."""


@dataclass
class Potential:
    """p(x) = 2 v_x - t - (4 alpha^2 - 1)/(4 x^2); identically zero for sigma = 0."""

    alpha: float
    t: float
    x_max: float = math.inf
    _spline: Optional[CubicSpline] = None

    @property
    def trivial(self):
        return self._spline is None

    def p(self, x):
        if self._spline is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        if np.any(np.asarray(x) > self.x_max * (1 + 1e-12)):
            raise RangeError(f"potential tabulated only up to x = {self.x_max}")
        return self._spline(x)

    def u(self, x):
        """2 v_x."""
        x = np.asarray(x, dtype=float)
        return self.t + (4.0 * self.alpha**2 - 1.0) / (4.0 * x * x) + self.p(x)


def trivial_potential(alpha, t) -> Potential:
    return Potential(float(BesselOrder(alpha)), float(t))


def build_potential(fam: KernelFamily, x_max, t=None, h=POTENTIAL_STEP, n=DEFAULT_NODES) -> Potential:
    """Tabulate p = -2 (log F)_xx on a uniform grid (6th-order differences) and spline it.

    log F is even in x, so the stencils reach across x = 0 through log F(|x|).
    """
    t = fam.t if t is None else float(t)
    spec = fam.weight
    if spec is None or isinstance(spec, Zero):
        return trivial_potential(fam.alpha, t)
    m = int(math.ceil(x_max / h)) + 1
    offs, wts = _fd.central_weights(2, 6)
    rad = max(offs)
    xs = h * np.arange(-rad, m + rad + 1)
    L, sign = log_det_lattice(fam.with_point(1.0, t), xs, [t], n)
    if np.any(sign <= 0):
        raise DomainError("F <= 0 while tabulating the potential")
    L = L[:, 0]
    grid = h * np.arange(0, m + 1)
    p = np.zeros(grid.size)
    for o, c in zip(offs, wts):
        p += c * L[rad + o: rad + o + grid.size]
    p *= -2.0 / (h * h)
    return Potential(fam.alpha, t, float(grid[-1]), CubicSpline(grid, p))


@dataclass
class BvpSolution:
    lam: float
    t: float
    x_samples: np.ndarray
    f_values: np.ndarray
    f_prime_values: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "f", "f_prime"])
            for row in zip(self.x_samples, self.f_values, self.f_prime_values):
                w.writerow([repr(float(v)) for v in row])


@dataclass
class BvpFamily:
    """Solutions for several lambda at once, with dense output in tau."""

    alpha: float
    t: float
    lams: np.ndarray
    x0: float
    x_max: float
    potential: Potential
    _dense: object

    def _wstate(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.x0 * (1 - 1e-12)) or np.any(x > self.x_max * (1 + 1e-12)):
            raise RangeError("evaluation outside the integrated range")
        y = self._dense(np.log(x))
        m = self.lams.size
        return y[:m], y[m:]

    def f(self, x):
        w, _ = self._wstate(x)
        return np.asarray(x) ** (self.alpha + 0.5) * w

    def f_x(self, x):
        w, wt = self._wstate(x)
        beta = self.alpha + 0.5
        return np.asarray(x) ** (beta - 1.0) * (beta * w + wt)

    def f_xx(self, x):
        lam = self.lams if np.ndim(x) == 0 else self.lams[:, None]
        return (self.potential.u(x) - lam) * self.f(x)

    def solution(self, i, x_samples) -> BvpSolution:
        xs = np.asarray(x_samples, dtype=float)
        return BvpSolution(float(self.lams[i]), self.t, xs, self.f(xs)[i], self.f_x(xs)[i])


def solve_bvp_family(potential: Potential, lams, x_max, *, x0=LAUNCH_X0, rtol=BVP_RTOL,
                     method="DOP853") -> BvpFamily:
    """Integrate the BVP for every lambda in ``lams`` from x0 to x_max."""
    a = potential.alpha
    t = potential.t
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    if np.any(lams <= t):
        raise DomainError("lambda must exceed t")
    if x_max > potential.x_max:
        raise RangeError(f"x_max = {x_max} beyond the potential table ({potential.x_max})")
    k = np.sqrt(lams - t)
    z = x0 * k
    # f = sqrt(x) J(xk): w = x^-alpha J(z), w_tau = -x^-alpha z J_{alpha+1}(z)
    scale = x0 ** (-a)
    w0 = scale * bessel_j(a, z)
    wt0 = -scale * z * bessel_j(a + 1.0, z)
    m = lams.size
    shift = t - lams

    def rhs(tau, y):
        x = math.exp(tau)
        w, wt = y[:m], y[m:]
        pot = 0.0 if potential.trivial else float(potential.p(x))
        return np.concatenate([wt, -2.0 * a * wt + x * x * (shift + pot) * w])

    def jac(tau, y):
        x = math.exp(tau)
        pot = 0.0 if potential.trivial else float(potential.p(x))
        J = np.zeros((2 * m, 2 * m))
        J[np.arange(m), m + np.arange(m)] = 1.0
        J[m + np.arange(m), np.arange(m)] = x * x * (shift + pot)
        J[m + np.arange(m), m + np.arange(m)] = -2.0 * a
        return J

    atol = 1e-3 * rtol * max(1.0, float(np.max(np.abs(w0))))
    kw = {"jac": jac} if method in ("Radau", "BDF", "LSODA") else {}
    sol = solve_ivp(rhs, (math.log(x0), math.log(x_max)), np.concatenate([w0, wt0]),
                    method=method, rtol=rtol, atol=atol, dense_output=True, **kw)
    if sol.status != 0:
        raise NumericError(f"BVP integration failed: {sol.message}")
    return BvpFamily(a, t, lams, x0, x_max, potential, sol.sol)


def _as_potential(source, alpha, t, x_max) -> Potential:
    if isinstance(source, Potential):
        return source
    if isinstance(source, KernelFamily):
        return build_potential(source, x_max + 0.1, t)
    if source is None or isinstance(source, Zero):
        return trivial_potential(alpha, t)
    raise DomainError("potential source must be a Potential, KernelFamily or None")


def solve_bvp_f(source, alpha, lam, t, x_max, *, n_samples=200, **kw) -> BvpSolution:
    """f(x; lam, t) on [x0, x_max] for a Potential, a KernelFamily (potential built from
    its determinant) or None (sigma = 0)."""
    a = float(BesselOrder(alpha))
    if not lam > t:
        raise DomainError("lambda must exceed t")
    pot = _as_potential(source, a, t, x_max)
    fam = solve_bvp_family(pot, [lam], x_max, **kw)
    xs = np.geomspace(fam.x0, x_max, n_samples)
    return fam.solution(0, xs)


# --- Stieltjes integrals over lambda ----------------------------------------------

def stieltjes_converged(spec: WeightSpec, t, evaluate, *, n0=LAMBDA_START, tol=LAMBDA_TOL, n_max=1025):
    """evaluate(nodes, weights) with the lambda rule refined (n -> 2n - 1) until it settles."""
    if isinstance(spec, Zero):
        return evaluate(np.zeros(0), np.zeros(0)), 0
    if not spec.smooth:
        nodes, wts = stieltjes_rule(spec, t, n0)
        return evaluate(nodes, wts), nodes.size
    n = n0
    nodes, wts = stieltjes_rule(spec, t, n)
    prev = evaluate(nodes, wts)
    while n < n_max:
        n = 2 * n - 1
        nodes, wts = stieltjes_rule(spec, t, n)
        cur = evaluate(nodes, wts)
        if np.max(np.abs(np.asarray(cur) - np.asarray(prev))) < tol:
            return cur, n
        prev = cur
    raise AccuracyError("lambda quadrature did not settle", diagnostic={"n": n})


def _family_or_none(pot, nodes, x_max, **kw):
    return solve_bvp_family(pot, nodes, x_max, **kw) if nodes.size else None


def _weight(fam: KernelFamily) -> WeightSpec:
    return fam.weight if fam.weight is not None else Zero()


def _v_derivatives(fam: KernelFamily, x_eval, h=0.05):
    fld = v_field(fam, [x_eval], [fam.t], h, h)
    d = fld.derivatives()
    return {k: float(v[0, 0]) for k, v in d.items()}


def verify_nonlocal(fam: KernelFamily, x_eval, *, potential=None, **kw) -> float:
    """2 v_t - x - int f(x; lambda, t)^2 d sigma(lambda) at x = x_eval."""
    spec = _weight(fam)
    pot = potential or _as_potential(fam, fam.alpha, fam.t, x_eval)

    def integral(nodes, w):
        sols = _family_or_none(pot, nodes, x_eval, **kw)
        return 0.0 if sols is None else float(np.sum(w * sols.f(x_eval) ** 2))

    val, _ = stieltjes_converged(spec, fam.t, integral)
    vt = _v_derivatives(fam, x_eval)["v_t"]
    return 2.0 * vt - x_eval - val


def verify_integral_rep(fam: KernelFamily, x_eval, *, potential=None, n_panels=40, **kw) -> float:
    """log F(x, t) - int_0^x log(x/y) int (lambda - t) f(y)^2 d sigma dy at x = x_eval."""
    spec = _weight(fam)
    t = fam.t
    pot = potential or _as_potential(fam, fam.alpha, t, x_eval)
    z, gw = leggauss(16)
    lx = math.log(x_eval)
    lo = max(math.log(LAUNCH_X0), lx - 30.0)
    edges = np.linspace(lo, lx, n_panels + 1)
    u = np.concatenate([0.5 * (b - a) * z + 0.5 * (a + b) for a, b in zip(edges[:-1], edges[1:])])
    uw = np.concatenate([0.5 * (b - a) * gw for a, b in zip(edges[:-1], edges[1:])])
    ys = np.exp(u)

    def outer(nodes, w):
        sols = _family_or_none(pot, nodes, x_eval, **kw)
        if sols is None:
            return 0.0
        G = ((w * (nodes - t))[:, None] * sols.f(ys) ** 2).sum(axis=0)
        # dy = y du; the head y < x0 is O(x0^(2 alpha + 2)) and dropped
        return float(np.sum(uw * (lx - u) * ys * G))

    val, _ = stieltjes_converged(spec, t, outer)
    logF = float(log_det_lattice(fam, [x_eval], [t])[0][0, 0])
    return logF - val


def verify_f_t_equation(fam: KernelFamily, alpha, lam, t, x_eval, h_t=0.05, *, order=2, **kw) -> float:
    """f_t - (v_xt f / 2 - v_t f_x) / (lambda - t), f_t by central differences in t."""
    a = float(BesselOrder(alpha))
    if h_t > 0.05:
        raise DomainError("h_t must be <= 0.05")
    if lam < t + FT_MIN_GAP or lam - 2 * h_t <= t:
        raise DomainError("lambda too close to t for the f_t identity")
    fam = fam.with_point(fam.x, t)
    if order == 2:
        offs = (-1, 1)
    elif order == 4:
        offs = (-2, -1, 1, 2)
    else:
        raise DomainError("order must be 2 or 4")
    vals = []
    for o in offs:
        pot = _as_potential(fam, a, t + o * h_t, x_eval)
        vals.append(float(solve_bvp_family(pot, [lam], x_eval, **kw).f(x_eval)[0]))
    _, wts = _fd.central_weights(1, order)
    wts = [c for c in wts if c != 0]
    f_t = float(np.dot(wts, vals)) / h_t
    pot = _as_potential(fam, a, t, x_eval)
    sol = solve_bvp_family(pot, [lam], x_eval, **kw)
    f = float(sol.f(x_eval)[0])
    fx = float(sol.f_x(x_eval)[0])
    d = _v_derivatives(fam, x_eval)
    return f_t - (0.5 * d["v_xt"] * f - d["v_t"] * fx) / (lam - t)


def g_derivatives(sols: BvpFamily, X):
    """g, g', g'' at X for g(X) = X^(-1/4) f(X^(1/2)) (prime = d/dX)."""
    x = math.sqrt(X)
    f, fx, fxx = sols.f(x), sols.f_x(x), sols.f_xx(x)
    g = X**-0.25 * f
    g1 = -0.25 * X**-1.25 * f + 0.5 * X**-0.75 * fx
    g2 = 5.0 / 16.0 * X**-2.25 * f - 0.5 * X**-1.75 * fx + 0.25 * X**-1.25 * fxx
    return g, g1, g2


def idpv_residual_terms(X, lam, g, g1, g2, Ig2, Iggp, Ixggp, alpha):
    """Left minus right side of the integro-differential Painleve V equation."""
    xgp_p = g1 + X * g2
    one = 1.0 + Ig2
    return (-X * g * one * Ixggp + X * one**2 * (xgp_p + lam / 4.0 * g)
            + X * X * g * Iggp**2 - alpha**2 / 4.0 * g)


def verify_idpv(fam: KernelFamily, alpha, x_eval, lams=(0.5, 1.0, 2.0, 4.0), *, potential=None,
                return_all=False, **kw):
    """Residual of the nonlocal Painleve V equation at X = x_eval (t = 0), max over ``lams``."""
    a = float(BesselOrder(alpha))
    if fam.t != 0.0:
        raise DomainError("the integro-differential Painleve V form is stated at t = 0")
    spec = _weight(fam)
    X = float(x_eval)
    xr = math.sqrt(X)
    pot = potential or _as_potential(fam, a, 0.0, xr)

    def moments(nodes, w):
        sols = _family_or_none(pot, nodes, xr, **kw)
        if sols is None:
            return np.zeros(3)
        g, g1, g2 = g_derivatives(sols, X)
        # I[g^2], I[g g'], I[(X g g')'] with (X g g')' = g g' + X g'^2 + X g g''
        return np.array([np.sum(w * g * g), np.sum(w * g * g1),
                         np.sum(w * (g * g1 + X * g1 * g1 + X * g * g2))])

    (Ig2, Iggp, Ixggp), _ = stieltjes_converged(spec, 0.0, moments)
    lams = np.asarray(lams, dtype=float)
    sols = solve_bvp_family(pot, lams, xr, **kw)
    g, g1, g2 = g_derivatives(sols, X)
    res = idpv_residual_terms(X, lams, g, g1, g2, Ig2, Iggp, Ixggp, a)
    if return_all:
        return res, (g, g1, g2)
    return float(np.max(np.abs(res)))
