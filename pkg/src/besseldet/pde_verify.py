"""Residuals of the nonlinear PDE for v, its x-differentiated form, and Bessel special solutions.

    (2 v_x - t) v_t^2 + 1/4 v_xt^2 - 1/2 v_xxt v_t = alpha^2 / 4
    v_xx v_t + (2 v_x - t) v_xt - 1/4 v_xxxt = 0
"""

from __future__ import annotations

import csv

import numpy as np

from . import _fd
from .errors import DomainError
from .fredholm import T_MARGIN, X_MARGIN, VField, trivial_v
from .kernel import bessel_kernel
from .specfun import BesselOrder


def _grid_t(field: VField):
    return np.broadcast_to(field.t_grid[None, :], field.v.shape)


def pde_residual(field: VField):
    """(2v_x - t) v_t^2 + v_xt^2/4 - v_xxt v_t/2 - alpha^2/4 at every grid point."""
    d = field.derivatives()
    t = _grid_t(field)
    return ((2.0 * d["v_x"] - t) * d["v_t"] ** 2 + 0.25 * d["v_xt"] ** 2
            - 0.5 * d["v_xxt"] * d["v_t"] - 0.25 * field.alpha**2)


def differentiated_residual(field: VField):
    """v_xx v_t + (2v_x - t) v_xt - v_xxxt/4 at every grid point."""
    d = field.derivatives()
    t = _grid_t(field)
    return d["v_xx"] * d["v_t"] + (2.0 * d["v_x"] - t) * d["v_xt"] - 0.25 * d["v_xxxt"]


def convergence_ok(coarse, fine, factor=3.0, floor=1e-8):
    """Halving the step must shrink the residual by ``factor``, unless both sit at the roundoff floor."""
    coarse, fine = float(coarse), float(fine)
    if coarse <= floor and fine <= floor:
        return True
    return fine * factor <= coarse


def _special_matrix(alpha, x, t, mus, nus):
    mus = np.asarray(mus, dtype=float)
    nus = np.asarray(nus, dtype=float)
    lam = x * x * (mus - t)
    mu = x * x * (nus - t)
    if np.any(lam <= 0) or np.any(mu <= 0):
        raise DomainError("special solution needs x^2 (mu_i - t), x^2 (nu_j - t) > 0")
    L, Mu = np.meshgrid(lam, mu, indexing="ij")
    return x * x * np.asarray(bessel_kernel(alpha, L, Mu)).reshape(L.shape)


def special_log_det(alpha, x, t, mus, nus):
    """log |det M|, M_ij = x^2 K(x^2 (mu_i - t), x^2 (nu_j - t))."""
    if len(mus) != len(nus) or len(mus) == 0:
        raise DomainError("need m >= 1 pairs (mu_i, nu_i)")
    M = _special_matrix(alpha, x, t, mus, nus)
    sign, logabs = np.linalg.slogdet(M)
    if sign == 0 or not np.isfinite(logabs) or np.linalg.cond(M) > 1e13:
        raise DomainError("special-solution matrix M is singular to working precision")
    return float(logabs)


def special_solution_v(alpha, x, t, mus, nus, h=0.05):
    """v = -d/dx log det M + x t/2 - (4 alpha^2 - 1)/(8x), derivative by 4th-order differences."""
    a = float(BesselOrder(alpha))
    dlog = _fd.derivative(lambda y: special_log_det(a, y, t, mus, nus), x, 1, h, order=4)
    return -dlog + trivial_v(a, x, t)


def special_solution_field(alpha, x, t, mus, nus, h=0.05) -> VField:
    """One-point VField at (x, t) whose lattice holds log |det M| (for the PDE residuals)."""
    a = float(BesselOrder(alpha))
    if not x - X_MARGIN * h > 0:
        raise DomainError("x too small for the stencil lattice")
    xs = x + h * np.arange(-X_MARGIN, X_MARGIN + 1)
    ts = t + h * np.arange(-T_MARGIN, T_MARGIN + 1)
    lattice = np.array([[special_log_det(a, xx, tt, mus, nus) for tt in ts] for xx in xs])
    v = np.array([[special_solution_v(a, x, t, mus, nus, h)]])
    return VField(a, np.array([float(x)]), np.array([float(t)]), v,
                  lattice[X_MARGIN:X_MARGIN + 1, T_MARGIN:T_MARGIN + 1], h, h, lattice)


def write_residual_csv(field: VField, residual, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "residual"])
        for i, x in enumerate(field.x_grid):
            for j, t in enumerate(field.t_grid):
                w.writerow([repr(float(x)), repr(float(t)), repr(float(residual[i, j]))])
