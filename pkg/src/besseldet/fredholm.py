"""Nystrom evaluation of F_sigma(x, t) = det(1 - K^sigma_{x,t}) and the field v(x, t).

Discretisation works in the reduced variable xi = lambda / x^2, in which the
weight factor sigma(x^-2 lambda + t) = sigma(xi + t) no longer depends on x.
Nodes are placed on s = sqrt(lambda) = x sqrt(xi), so for a fixed reduced rule
the discrete determinant is a smooth function of (x, t); this is what makes the
finite-difference derivatives of log F usable.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import lu_factor
from scipy.special import roots_jacobi

from . import _fd
from .errors import DomainError, NumericError, UnsupportedVariantError
from .kernel import (KernelFamily, bessel_kernel_diag, kernel_matrix,
                     positive_temperature_matrix, sigma_values, PT_TAIL_TOL)
from .specfun import BesselOrder, bessel_j
from .weights import Step, WeightSpec, Zero

LAMBDA_TOL = 1e-14
PIVOT_FLAG = 1e-13
DEFAULT_NODES = 96


@dataclass(frozen=True)
class Quadrature:
    """Rule for int_0^Lambda h(lambda) d lambda with nodes lambda = s^2."""

    n: int
    mapped_nodes: np.ndarray
    weights: np.ndarray
    truncation: float
    tail_bound: float = 0.0
    mapping: str = "lambda = s^2"

    @property
    def lam(self):
        return self.mapped_nodes**2


@dataclass(frozen=True)
class DeterminantResult:
    F: float
    logF: float
    n_used: int
    tail_bound: float
    cond_flag: bool
    sign: int = 1


# --- reduced rules ---------------------------------------------------------------

@lru_cache(maxsize=64)
def _diag_envelope(alpha, lam0):
    """sup over lambda >= lam0 of K(lambda, lambda) sqrt(1 + lambda), with a 20% margin."""
    grid = lam0 * np.logspace(0, 5, 400)
    env = np.max(bessel_kernel_diag(alpha, grid) * np.sqrt(1.0 + grid))
    # K(l, l) ~ 1/(2 pi sqrt l) beyond the grid
    return 1.2 * max(env, 1.0 / (2.0 * math.pi))


def _reduced_truncation(spec: WeightSpec, t_values, x_max):
    """Xi such that sigma(xi + t)(1 + x^2 xi)^(1/2) < tol for xi > Xi/2, all t (then doubled)."""
    t_values = np.atleast_1d(np.asarray(t_values, dtype=float))
    if isinstance(spec, Zero):
        return 0.0
    end = spec.support_end()
    if math.isfinite(end):
        # compact support: truncate exactly at the last break
        return max(0.0, end - float(t_values.min()))

    def crit(xi):
        xi = np.asarray(xi, dtype=float)
        sig = np.max(np.abs([spec.sigma(xi + t) for t in t_values]), axis=0)
        return sig * np.sqrt(1.0 + x_max**2 * xi)

    hi = 1.0
    while np.any(crit(np.linspace(hi, 4.0 * hi, 64)) >= LAMBDA_TOL):
        hi *= 2.0
        if hi > 1e8:
            raise DomainError("weight does not decay fast enough for truncation")
    grid = np.linspace(0.0, hi, 4001)
    bad = np.nonzero(crit(grid) >= LAMBDA_TOL)[0]
    if bad.size == 0:
        return 0.0
    xi = grid[min(bad[-1] + 1, grid.size - 1)]
    return 2.0 * xi


def _tail_bound(alpha, spec, t_values, x_max, Xi):
    if Xi <= 0 or isinstance(spec, Zero):
        return 0.0
    end = spec.support_end()
    t_min = float(np.min(t_values))
    if math.isfinite(end) and Xi >= end - t_min:
        return 0.0
    lam0 = max(Xi * x_max**2, 1e-8)
    env = _diag_envelope(float(alpha), round(lam0, 12))
    # int_Xi^inf |sigma(xi + t)| x^2 K(x^2 xi) d xi <= env x^2 (1 + x^2 Xi)^(-1/2) int |sigma|
    return env * x_max**2 / math.sqrt(1.0 + lam0) * spec.tail_integral(Xi + t_min)


def _panel_rule(a, b, n):
    z, w = leggauss(n)
    return 0.5 * (b - a) * z + 0.5 * (a + b), 0.5 * (b - a) * w


def _jacobi_panel(alpha, b, n):
    """Rule for int_0^b h(vs^2) 2 vs d vs where h(xi) ~ xi^alpha, so the integrand ~ vs^(2 alpha + 1).

    The returned weights already contain the 2 vs Jacobian, like the Legendre panels.
    """
    beta = 2.0 * alpha + 1.0
    z, w = roots_jacobi(n, 0.0, beta)
    sv = 0.5 * b * (z + 1.0)
    # int_0^b g dvs = (b/2)^(beta+1) sum w (g / vs^beta), g = 2 vs h(vs^2)
    return sv, (0.5 * b) ** (beta + 1.0) * w * sv ** (-beta) * 2.0 * sv


def _analytic_in_s(alpha):
    """True when the integrand ~ s^(2 alpha + 1) near 0 is a polynomial factor (no Jacobi needed)."""
    beta = 2.0 * alpha + 1.0
    return beta >= 0 and beta == round(beta)


def reduced_rule(alpha, spec: WeightSpec, t_values, x_max, n, mode="legendre"):
    """Nodes xi_i and weights with int_0^Xi h(xi) d xi ~ sum w_i h(xi_i).

    Nodes sit at xi = varsigma^2 on Gauss panels in varsigma, split at the
    weight's break points (in xi units, r_j - t) when sigma is a step function.
    ``mode`` "jacobi" puts Gauss-Jacobi on the first panel to absorb the
    s^(2 alpha + 1) endpoint behaviour; "auto" does so only when 2 alpha + 1 is
    not a non-negative integer.
    """
    a = float(BesselOrder(alpha))
    if mode not in ("legendre", "jacobi", "auto"):
        raise DomainError(f"unknown quadrature mode {mode!r}")
    if mode == "auto":
        mode = "legendre" if _analytic_in_s(a) else "jacobi"
    if mode == "legendre" and a < -0.5:
        raise UnsupportedVariantError(
            "endpoint-singular: alpha < -1/2 needs the Jacobi-weighted mode (mode='jacobi')")
    if n < 16:
        raise DomainError("n must be >= 16")
    t_values = np.atleast_1d(np.asarray(t_values, dtype=float))
    Xi = _reduced_truncation(spec, t_values, x_max)
    if Xi <= 0:
        return np.zeros(0), np.zeros(0), 0.0, 0.0
    cuts = [0.0, Xi]
    if t_values.size == 1:
        for r, _ in spec.jumps():
            xi_j = r - float(t_values[0])
            if 0 < xi_j < Xi:
                cuts.append(xi_j)
    edges = np.sqrt(np.array(sorted(set(cuts))))
    lengths = np.diff(edges)
    counts = np.maximum(8, np.round(n * lengths / lengths.sum()).astype(int))
    counts[-1] = max(8, n - counts[:-1].sum()) if counts.size > 1 else n
    nodes, wts = [], []
    for k, (lo, hi, m) in enumerate(zip(edges[:-1], edges[1:], counts)):
        if k == 0 and mode == "jacobi":
            sv, w = _jacobi_panel(a, hi, int(m))
        else:
            sv, w = _panel_rule(lo, hi, int(m))
            w = w * 2.0 * sv
        nodes.append(sv)
        wts.append(w)
    sv = np.concatenate(nodes)
    return sv, np.concatenate(wts), Xi, _tail_bound(a, spec, t_values, x_max, Xi)


def build_quadrature(fam: KernelFamily, n: int = DEFAULT_NODES, mode="legendre") -> Quadrature:
    """Gauss rule on (0, sqrt(Lambda)) in s with lambda = s^2; the 2s Jacobian is in the weights."""
    spec = fam.weight if fam.weight is not None else Zero()
    sv, w, Xi, tail = reduced_rule(fam.alpha, spec, [fam.t], fam.x, n, mode)
    x2 = fam.x**2
    return Quadrature(n=sv.size, mapped_nodes=fam.x * sv, weights=x2 * w,
                      truncation=x2 * Xi, tail_bound=tail)


# --- determinants -----------------------------------------------------------------

def _logdet(K, w, sig):
    """(log|det|, sign, min |pivot|) of I - D K D S, D = sqrt(w |sigma|), S = sign(sigma)."""
    d = np.sqrt(w * np.abs(sig))
    M = -(d[:, None] * K * (d * np.sign(sig))[None, :])
    M[np.diag_indices_from(M)] += 1.0
    lu, piv = lu_factor(M, check_finite=False)
    diag = np.diag(lu)
    if not np.all(np.isfinite(diag)):
        raise NumericError("non-finite entries in the Nystrom matrix")
    piv_min = float(np.min(np.abs(diag))) if diag.size else 1.0
    if piv_min == 0.0:
        raise NumericError("Nystrom matrix is singular to working precision")
    swaps = int(np.sum(piv != np.arange(piv.size)))
    sign = (-1) ** swaps * int(np.prod(np.sign(diag)))
    return float(np.sum(np.log(np.abs(diag)))), sign, piv_min


def _result(logabs, sign, n, tail, piv_min):
    return DeterminantResult(F=sign * math.exp(logabs), logF=logabs, n_used=n,
                             tail_bound=tail, cond_flag=piv_min < PIVOT_FLAG, sign=sign)


def fredholm_det(fam: KernelFamily, quad: Quadrature | None = None) -> DeterminantResult:
    """det(1 - K^sigma_{x,t}) by Nystrom on ``quad`` with an LU factorisation.

    ``logF`` holds log|F|; ``sign`` is -1 only for weights outside [0, 1].
    """
    spec = fam.weight
    if spec is None or isinstance(spec, Zero):
        return DeterminantResult(1.0, 0.0, 0, 0.0, False, 1)
    if quad is None:
        quad = build_quadrature(fam)
    if quad.n == 0:
        return DeterminantResult(1.0, 0.0, 0, quad.tail_bound, False, 1)
    lam = quad.lam
    sig = sigma_values(spec, lam / fam.x**2 + fam.t)
    K = kernel_matrix(fam.alpha, lam)
    logabs, sign, piv = _logdet(K, quad.weights, sig)
    return _result(logabs, sign, quad.n, quad.tail_bound, piv)


def log_det_lattice(fam: KernelFamily, xs, ts, n=DEFAULT_NODES, mode="legendre"):
    """log F on the tensor grid xs x ts, sharing one reduced rule (smooth weights).

    F depends on x only through x^2, so log F(x) = log F(|x|) and log F(0) = 0.
    Returns (logF, sign) arrays of shape (len(xs), len(ts)).
    """
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    spec = fam.weight
    out = np.zeros((xs.size, ts.size))
    sgn = np.ones((xs.size, ts.size), dtype=int)
    if spec is None or isinstance(spec, Zero):
        return out, sgn
    ax = np.abs(xs)
    if spec.smooth:
        rules = {None: reduced_rule(fam.alpha, spec, ts, ax.max(), n, mode)}
    else:
        rules = {j: reduced_rule(fam.alpha, spec, [t], ax.max(), n, mode) for j, t in enumerate(ts)}
    sig_cache = {}
    for i, x in enumerate(ax):
        if x == 0.0:
            continue
        kmats = {}
        for j, t in enumerate(ts):
            key = None if spec.smooth else j
            sv, w, _, _ = rules[key]
            if sv.size == 0:
                continue
            if key not in kmats:
                kmats[key] = kernel_matrix(fam.alpha, (x * sv) ** 2)
            if (key, j) not in sig_cache:
                sig_cache[(key, j)] = sigma_values(spec, sv**2 + t)
            out[i, j], sgn[i, j], _ = _logdet(kmats[key], x * x * w, sig_cache[(key, j)])
    return out, sgn


def fredholm_det_pt(alpha, spec: WeightSpec, x, n=64) -> DeterminantResult:
    """F_sigma(x, 0) as det(1 - 1_(0,x^2) K~_sigma 1_(0,x^2)) with the positive-temperature kernel."""
    a = float(BesselOrder(alpha))
    if not x > 0:
        raise DomainError("x must be positive")
    if isinstance(spec, Zero):
        return DeterminantResult(1.0, 0.0, 0, 0.0, False, 1)
    if not _analytic_in_s(a):
        sv, w = _jacobi_panel(a, x, n)
    else:
        sv, w = _panel_rule(0.0, x, n)
        w = w * 2.0 * sv
    K = positive_temperature_matrix(a, spec, sv**2)
    logabs, sign, piv = _logdet(K, w, np.ones_like(w))
    return _result(logabs, sign, n, PT_TAIL_TOL, piv)


def series_oracle(fam: KernelFamily, N: int, n_quad: int = 48) -> float:
    """Partial sum through order N of 1 + sum_n (-1)^n/n! int det[K^sigma(l_i, l_j)] d^n l.

    Independent of the Nystrom path: Gauss-Legendre directly in lambda, kernel
    entries from the convolution representation 1/4 int_0^1 J J d rho, and the
    n-fold integrals as explicit tensor sums (N <= 3).
    """
    if not 0 <= N <= 3:
        raise DomainError("series_oracle supports 0 <= N <= 3")
    spec = fam.weight
    if N == 0 or spec is None or isinstance(spec, Zero):
        return 1.0
    Xi = _reduced_truncation(spec, [fam.t], fam.x)
    if Xi <= 0:
        return 1.0
    x2 = fam.x**2
    cuts = sorted({0.0, Xi, *[r - fam.t for r, _ in spec.jumps() if 0 < r - fam.t < Xi]})
    lam, wl = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        z, w = leggauss(n_quad)
        lam.append(x2 * (0.5 * (hi - lo) * z + 0.5 * (hi + lo)))
        wl.append(x2 * 0.5 * (hi - lo) * w)
    lam, wl = np.concatenate(lam), np.concatenate(wl)
    # kernel from the convolution formula, rho on (0, 1) with rho = r^2
    zr, wr = leggauss(64)
    r = 0.5 * (zr + 1.0)
    wr = 0.25 * 0.5 * wr * 2.0 * r
    J = bessel_j(fam.alpha, np.outer(r, np.sqrt(lam)))
    K = J.T @ (wr[:, None] * J)
    g = wl * spec.sigma(lam / x2 + fam.t)
    Kd = np.diag(K)
    total = 1.0
    t1 = float(np.sum(g * Kd))
    total -= t1
    if N >= 2:
        # det[[K11, K12], [K21, K22]]
        t2 = float(np.sum(np.outer(g * Kd, g * Kd)) - np.sum(np.outer(g, g) * K * K))
        total += t2 / 2.0
    if N >= 3:
        gK = K * g[None, :]  # K_ij g_j
        # sum g_i g_j g_k det3 = tr(G)^3 - 3 tr(G) tr(G^2) + 2 tr(G^3), G = K diag(g)
        tr1 = t1
        G2 = gK @ gK
        tr2 = float(np.trace(G2))
        tr3 = float(np.sum(G2 * gK.T))
        t3 = tr1**3 - 3.0 * tr1 * tr2 + 2.0 * tr3
        total -= t3 / 6.0
    return total


# --- the field v ------------------------------------------------------------------

X_MARGIN = 6
T_MARGIN = 4


def _uniform(grid, h, name):
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size > 1:
        steps = np.diff(grid) / h
        k = np.round(steps[0])
        if k < 1 or np.any(np.abs(steps - k) > 1e-9):
            raise DomainError(f"{name} grid must be uniform with spacing a multiple of the FD step")
        return grid, int(k)
    return grid, 1


@dataclass
class VField:
    """v(x, t) on a grid, together with the log F lattice used for its derivatives.

    ``lattice`` has spacing (h_x, h_t) and extends X_MARGIN / T_MARGIN points
    beyond the grid on every side.
    """

    alpha: float
    x_grid: np.ndarray
    t_grid: np.ndarray
    v: np.ndarray
    logF: np.ndarray
    h_x: float
    h_t: float
    lattice: np.ndarray = field(repr=False)
    x_stride: int = 1
    t_stride: int = 1

    def _grid_index(self):
        ix = X_MARGIN + self.x_stride * np.arange(self.x_grid.size)
        it = T_MARGIN + self.t_stride * np.arange(self.t_grid.size)
        return ix, it

    def dlog(self, nx, nt, order=4):
        """d^nx/dx^nx d^nt/dt^nt log F on the grid, by tensor central stencils."""
        ox, wx = _fd.central_weights(nx, order)
        ot, wt = _fd.central_weights(nt, order)
        if max(ox) > X_MARGIN or max(ot) > T_MARGIN:
            raise DomainError("stencil wider than the stored lattice margin")
        ix, it = self._grid_index()
        out = np.zeros((ix.size, it.size))
        for a, ca in zip(ox, wx):
            if ca == 0:
                continue
            for b, cb in zip(ot, wt):
                if cb == 0:
                    continue
                out += ca * cb * self.lattice[np.ix_(ix + a, it + b)]
        return out / (self.h_x**nx * self.h_t**nt)

    def derivatives(self):
        """v_x, v_t, v_xt, v_xx, v_xxt, v_xxxt on the grid."""
        a2 = 4.0 * self.alpha**2 - 1.0
        X, T = np.meshgrid(self.x_grid, self.t_grid, indexing="ij")
        return {
            "v_x": -self.dlog(2, 0) + T / 2.0 + a2 / (8.0 * X**2),
            "v_t": -self.dlog(1, 1) + X / 2.0,
            "v_xt": -self.dlog(2, 1) + 0.5,
            "v_xx": -self.dlog(3, 0) - a2 / (4.0 * X**3),
            "v_xxt": -self.dlog(3, 1),
            "v_xxxt": -self.dlog(4, 1),
        }

    def to_csv(self, path):
        write_grid_csv(self, path)


def trivial_v(alpha, x, t):
    return x * t / 2.0 - (4.0 * alpha**2 - 1.0) / (8.0 * x)


def v_from_lattice(alpha, lattice, x_grid, t_grid, h_x, x_stride=1, t_stride=1):
    """v on the grid: 4th-order d/dx of log F with one Richardson level (6th order)."""
    ix = X_MARGIN + x_stride * np.arange(len(x_grid))
    it = T_MARGIN + t_stride * np.arange(len(t_grid))
    offs, w = _fd.central_weights(1, 4)

    def d1(step):
        acc = np.zeros((ix.size, it.size))
        for o, c in zip(offs, w):
            acc += c * lattice[np.ix_(ix + step * o, it)]
        return acc / (step * h_x)

    dx = (16.0 * d1(1) - d1(2)) / 15.0
    X, T = np.meshgrid(x_grid, t_grid, indexing="ij")
    return -dx + trivial_v(alpha, X, T)


def v_field(fam: KernelFamily, x_grid, t_grid, h_x=0.05, h_t=0.05, n=DEFAULT_NODES,
            mode="legendre") -> VField:
    """Sample v = -d/dx log F + x t/2 - (4 alpha^2 - 1)/(8x) on x_grid x t_grid."""
    x_grid, sx = _uniform(x_grid, h_x, "x")
    t_grid, st = _uniform(t_grid, h_t, "t")
    if np.any(x_grid <= 2 * h_x):
        raise DomainError("all x must exceed 2 h_x")
    xs = x_grid[0] + h_x * np.arange(-X_MARGIN, sx * (x_grid.size - 1) + X_MARGIN + 1)
    ts = t_grid[0] + h_t * np.arange(-T_MARGIN, st * (t_grid.size - 1) + T_MARGIN + 1)
    lattice, sign = log_det_lattice(fam, xs, ts, n, mode)
    if np.any(sign <= 0):
        raise DomainError("F <= 0 encountered on the lattice")
    ix = X_MARGIN + sx * np.arange(x_grid.size)
    it = T_MARGIN + st * np.arange(t_grid.size)
    v = v_from_lattice(fam.alpha, lattice, x_grid, t_grid, h_x, sx, st)
    if not np.all(np.isfinite(v)):
        raise NumericError("non-finite v")
    return VField(fam.alpha, x_grid, t_grid, v, lattice[np.ix_(ix, it)], h_x, h_t, lattice, sx, st)


def write_grid_csv(fld: VField, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "logF", "F", "v"])
        for i, x in enumerate(fld.x_grid):
            for j, t in enumerate(fld.t_grid):
                lf = fld.logF[i, j]
                w.writerow([repr(float(x)), repr(float(t)), repr(float(lf)),
                            repr(math.exp(lf)), repr(float(fld.v[i, j]))])


def read_grid_csv(path):
    """Returns (x_grid, t_grid, logF, v) from a grid CSV."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    xg = np.unique(rows[:, 0])
    tg = np.unique(rows[:, 1])
    shape = (xg.size, tg.size)
    return xg, tg, rows[:, 2].reshape(shape), rows[:, 4].reshape(shape)
