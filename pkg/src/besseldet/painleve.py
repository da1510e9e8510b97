"""Painleve V reductions for step weights: the Tracy-Widom equation and the coupled system.

For sigma = sum_j (1 - s_j) 1_[r_{j-1}, r_j) the determinant is

    log F(sqrt x, 0) = -sum_j (r_j / 4) int_0^x log(x / y) q_j(y)^2 dy,

where the q_j solve

    x q_j (1 - S) sum_l (x q_l q_l')' + x (1 - S)^2 ((x q_j')' + r_j q_j / 4)
        + x^2 q_j (sum_l q_l q_l')^2 = alpha^2 q_j / 4,      S = sum_l q_l^2,

with q_j ~ sqrt(s_{j+1} - s_j) J_alpha(sqrt(x r_j)) as x -> 0+ (s_{k+1} = 1).

Integration is in tau = log x (x d/dx = d/dtau).  With P = sum q_l q_l', E = sum q_l'^2
(tau-derivatives) the system reads (1 - S)[(1 - S) I + q q^T] q'' = b,

    b_j = alpha^2 q_j / 4 - q_j (1 - S) E - (1 - S)^2 (x r_j / 4) q_j - q_j P^2,

and ((1 - S) I + q q^T)^{-1} = (I - q q^T) / (1 - S), so q'' = (I - q q^T) b / (1 - S)^2.
Back in x the coefficient of q_j'' is x^2 (1 - S), since q_tautau = x^2 q'' + x q'.
For k = 1 this collapses to (1 - q^2) q'' = alpha^2 q / 4 - q q'^2 - (x/4)(1 - q^2)^2 q.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import solve_ivp

from .errors import DomainError, SingularityError
from .specfun import BesselOrder, bessel_j, bessel_zj_deriv

SINGULAR_GAP = 1e-8
ODE_RTOL = 1e-11
ODE_ATOL = 1e-14


def launch_point(alpha):
    """Start of integration: the J_alpha boundary data is off by O(x0^(alpha+1)) relative."""
    return min(1e-4, 1e-12 ** (1.0 / (alpha + 1.0)))


@dataclass
class PainleveSolution:
    """q_j sampled at x_samples (rows of ``q``), plus dense output in tau = log x.

    ``log_int`` holds int_0^x log(x/y) q_j(y)^2 dy at the samples.
    """

    alpha: float
    r_values: np.ndarray
    s_values: np.ndarray
    x_samples: np.ndarray
    q: np.ndarray
    log_int: np.ndarray
    x0: float
    _dense: object = None
    _const: bool = False

    @property
    def k(self):
        return self.r_values.size

    def state(self, x):
        """(q, q_tau, A, B) at x, with A = int_0^x q^2, B = int_0^x log(x/y) q^2."""
        x = float(x)
        k = self.k
        if self._const:
            # q identically 1 (alpha = 0, s = 0): A = x, B = x
            return np.ones(k), np.zeros(k), np.full(k, x), np.full(k, x)
        if self._dense is None:
            z = np.zeros(k)
            return z, z, z, z
        if not self.x0 <= x <= self.x_samples[-1] * (1 + 1e-12):
            raise DomainError(f"x = {x} outside the computed range [{self.x0}, {self.x_samples[-1]}]")
        y = self._dense(math.log(x))
        return y[:k], y[k:2 * k], y[2 * k:3 * k], y[3 * k:]

    def q_at(self, x):
        return self.state(x)[0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + [f"q_{j + 1}" for j in range(self.k)])
            for i, x in enumerate(self.x_samples):
                w.writerow([repr(float(x))] + [repr(float(v)) for v in self.q[:, i]])


def _head(alpha, c, r, x0, n=24):
    """A, B over (0, x0) from the leading Bessel behaviour (y = x0 u^2, Gauss in u)."""
    z, w = leggauss(n)
    u = 0.5 * (z + 1.0)
    wu = 0.5 * w
    y = x0 * u * u
    jac = 2.0 * x0 * u * wu
    A = np.empty(c.size)
    B = np.empty(c.size)
    for j in range(c.size):
        q2 = (c[j] * bessel_j(alpha, np.sqrt(y * r[j]))) ** 2
        A[j] = np.sum(jac * q2)
        B[j] = np.sum(jac * np.log(x0 / y) * q2)
    return A, B


def _rhs_factory(alpha, r):
    k = r.size
    a2 = alpha * alpha / 4.0

    def rhs(tau, y):
        q, p = y[:k], y[k:2 * k]
        A = y[2 * k:3 * k]
        x = math.exp(tau)
        S = float(q @ q)
        gap = 1.0 - S
        P = float(q @ p)
        E = float(p @ p)
        b = a2 * q - q * gap * E - gap * gap * (x * r / 4.0) * q - q * P * P
        qpp = (b - q * float(q @ b)) / (gap * gap)
        # A' = x q^2 (tau-derivative of int_0^x q^2), B' = A
        return np.concatenate([p, qpp, x * q * q, A])

    def near_singular(tau, y):
        q = y[:k]
        return 1.0 - float(q @ q) - SINGULAR_GAP

    near_singular.terminal = True
    near_singular.direction = -1
    return rhs, near_singular


def solve_coupled(alpha, breaks, x_max, *, x0=None, n_samples=400, rtol=ODE_RTOL) -> PainleveSolution:
    """Integrate the coupled system for breaks = [(r_1, s_1), ..., (r_k, s_k)] on (0, x_max]."""
    a = float(BesselOrder(alpha))
    breaks = sorted((float(rr), float(ss)) for rr, ss in breaks)
    if not breaks:
        raise DomainError("need at least one break")
    r = np.array([b[0] for b in breaks])
    s = np.array([b[1] for b in breaks])
    if np.any(np.diff(r) <= 0):
        raise DomainError("break points must be strictly increasing")
    if np.any(r <= 0):
        raise DomainError("break points must be positive (J_alpha(sqrt(x r_j)) launch data)")
    if not x_max > 0:
        raise DomainError("x_max must be positive")
    rad = np.append(s[1:], 1.0) - s
    if np.any(rad < 0):
        raise DomainError("boundary radicands s_{j+1} - s_j must be >= 0 (complex data rejected)")
    c = np.sqrt(rad)
    x0 = launch_point(a) if x0 is None else float(x0)
    x0 = min(x0, 0.5 * x_max)
    xs = np.geomspace(x0, x_max, n_samples)
    if np.all(c == 0):
        z = np.zeros((r.size, xs.size))
        return PainleveSolution(a, r, s, xs, z, z.copy(), x0)
    if a == 0.0 and abs(float(c @ c) - 1.0) < 1e-15:
        if r.size == 1:
            # alpha = 0, s = 0: q = 1 solves the equation exactly and F(sqrt x, 0) = exp(-x r/4)
            ones = np.ones((1, xs.size))
            return PainleveSolution(a, r, s, xs, ones, xs[None, :].copy(), x0, None, True)
        raise SingularityError("boundary data has sum q_j^2 -> 1 at x = 0", location=0.0)
    zr = np.sqrt(x0 * r)
    q0 = c * bessel_j(a, zr)
    p0 = 0.5 * c * bessel_zj_deriv(a, zr)  # x d/dx J(sqrt(x r)) = z J'(z) / 2
    if float(q0 @ q0) >= 1.0 - SINGULAR_GAP:
        raise SingularityError("launch data already has sum q^2 >= 1", location=x0)
    A0, B0 = _head(a, c, r, x0)
    rhs, event = _rhs_factory(a, r)
    sol = solve_ivp(rhs, (math.log(x0), math.log(x_max)), np.concatenate([q0, p0, A0, B0]),
                    method="DOP853", rtol=rtol, atol=ODE_ATOL, dense_output=True, events=event)
    if sol.status == 1:
        loc = math.exp(sol.t_events[0][0])
        raise SingularityError(f"sum q_j^2 reached 1 near x = {loc:.6g}", location=loc)
    if sol.status != 0:
        raise SingularityError(f"integration failed: {sol.message}", location=math.exp(sol.t[-1]))
    Y = sol.sol(np.log(xs))
    k = r.size
    return PainleveSolution(a, r, s, xs, Y[:k], Y[3 * k:], x0, sol.sol)


def solve_tw(alpha, s, x_max, **kw) -> PainleveSolution:
    """Tracy-Widom case: single equation with r = 1, q ~ sqrt(1 - s) J_alpha(sqrt x)."""
    if not 0.0 <= s <= 1.0:
        raise DomainError("s must lie in [0, 1]")
    return solve_coupled(alpha, [(1.0, s)], x_max, **kw)


def coupled_log_det(sol: PainleveSolution, x) -> float:
    """sum_j -(r_j / 4) int_0^x log(x / y) q_j(y)^2 dy, i.e. log F(sqrt x, 0)."""
    B = sol.state(x)[3]
    return float(-np.sum(sol.r_values * B) / 4.0)


def tw_log_det(sol: PainleveSolution, x) -> float:
    """-(1/4) int_0^x log(x / y) q(y)^2 dy."""
    B = sol.state(x)[3]
    return float(-B[0] / 4.0)


def tw_log_det_quadrature(sol: PainleveSolution, x, n_panels=24, n=16) -> float:
    """Same integral by Gauss panels in log y over the dense q (independent of the A, B states)."""
    x = float(x)
    if sol._const:
        return -x / 4.0
    if sol._dense is None:
        return 0.0
    z, w = leggauss(n)
    taus = np.linspace(math.log(sol.x0), math.log(x), n_panels + 1)
    total = 0.0
    for lo, hi in zip(taus[:-1], taus[1:]):
        u = 0.5 * (hi - lo) * z + 0.5 * (hi + lo)
        q = sol._dense(u)[0]
        total += float(np.sum(0.5 * (hi - lo) * w * (math.log(x) - u) * np.exp(u) * q * q))
    c = math.sqrt((sol.s_values[1] if sol.k > 1 else 1.0) - sol.s_values[0])
    A0, B0 = _head(sol.alpha, np.array([c]), sol.r_values[:1], sol.x0)
    # head over (0, x0): int log(x/y) q^2 = B(x0) + log(x/x0) A(x0)
    total += float(B0[0] + math.log(x / sol.x0) * A0[0])
    return -total / 4.0
