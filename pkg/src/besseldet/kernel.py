"""Bessel kernel, its diagonal, the conjugated kernel and the positive-temperature kernel.

    K(l, m) = [A(l) B(m) - B(l) A(m)] / (l - m),
    A(l) = J_a(sqrt l),  B(l) = 1/2 sqrt(l) J_a'(sqrt l).

A and B satisfy the first-order system A' = B / l, B' = -1/4 (1 - a^2 / l) A,
which is what the diagonal and near-diagonal formulas below are built from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

from .errors import AccuracyError, DomainError
from .specfun import BesselOrder, bessel_j
from .weights import Step, Table, WeightSpec, Zero

NEAR_DIAG_RTOL = 1e-6
SIGMA_CLAMP = 1e-14
PT_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class KernelFamily:
    """Bessel kernel of order ``order`` conjugated by sqrt(sigma(x^-2 lambda + t))."""

    order: float
    weight: Optional[WeightSpec] = None
    x: float = 1.0
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "order", BesselOrder(self.order))
        if not self.x > 0:
            raise DomainError(f"scale x must be positive, got {self.x}")

    @property
    def alpha(self) -> float:
        return float(self.order)

    def with_point(self, x, t) -> "KernelFamily":
        return KernelFamily(self.order, self.weight, x, t)


def _check_positive(*args):
    for a in args:
        if np.any(np.asarray(a) <= 0):
            raise DomainError("kernel arguments must be positive")


def bessel_ab(alpha, lam):
    """A(lam), B(lam) and J_{alpha+1}(sqrt lam)."""
    u = np.sqrt(np.asarray(lam, dtype=float))
    ja = bessel_j(alpha, u)
    ja1 = bessel_j(alpha + 1.0, u)
    # 1/2 u J_a'(u) = 1/2 (a J_a - u J_{a+1})
    return ja, 0.5 * (alpha * ja - u * ja1), ja1


def bessel_kernel_diag(alpha, lam):
    """Diagonal K(lam, lam) = 1/4 [J_a^2 + J_{a+1}^2 - (2a/u) J_a J_{a+1}], u = sqrt(lam).

    Equivalent to B^2/lam + 1/4 (1 - a^2/lam) A^2 (obtained by l'Hopital and the
    first-order system), rewritten without the J' cancellation.
    """
    a = float(BesselOrder(alpha))
    _check_positive(lam)
    lam = np.asarray(lam, dtype=float)
    u = np.sqrt(lam)
    ja = bessel_j(a, u)
    ja1 = bessel_j(a + 1.0, u)
    out = 0.25 * (ja * ja + ja1 * ja1 - (2.0 * a / u) * ja * ja1)
    return float(out) if out.ndim == 0 else out


def _near_diag(a, lam, mu):
    # second-order Taylor expansion of K(m + h, m - h) in h around the midpoint m
    m = 0.5 * (lam + mu)
    h = 0.5 * (lam - mu)
    A, B, _ = bessel_ab(a, m)
    p = 1.0 / m
    w = -0.25 * (1.0 - a * a / m)
    dp, ddp = -1.0 / m**2, 2.0 / m**3
    dw, ddw = -a * a / (4.0 * m**2), a * a / (2.0 * m**3)
    k0 = B * B / m + 0.25 * (1.0 - a * a / m) * A * A
    k2 = (ddp + 4 * p * p * w) * B * B + (-ddw - 4 * p * w * w) * A * A + 2 * (p * dw - dp * w) * A * B
    return k0 + h * h / 6.0 * k2


def bessel_kernel(alpha, lam, mu):
    """Bessel kernel K(lam, mu); the near-diagonal region uses a midpoint expansion."""
    a = float(BesselOrder(alpha))
    _check_positive(lam, mu)
    lam_a, mu_a = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(mu, dtype=float))
    near = np.abs(lam_a - mu_a) < NEAR_DIAG_RTOL * np.maximum(1.0, lam_a)
    out = np.empty(lam_a.shape)
    if np.any(near):
        out[near] = _near_diag(a, lam_a[near], mu_a[near])
    far = ~near
    if np.any(far):
        l, m = lam_a[far], mu_a[far]
        A1, B1, _ = bessel_ab(a, l)
        A2, B2, _ = bessel_ab(a, m)
        out[far] = (A1 * B2 - B1 * A2) / (l - m)
    return float(out) if out.ndim == 0 else out


def bessel_kernel_conv(alpha, lam, mu, n_quad=64):
    """1/4 int_0^1 J_a(sqrt(rho lam)) J_a(sqrt(rho mu)) d rho by Gauss-Legendre (oracle path)."""
    a = float(BesselOrder(alpha))
    _check_positive(lam, mu)
    if n_quad < 16:
        raise DomainError("n_quad must be >= 16")
    z, w = leggauss(n_quad)
    # rho = r^2 keeps the integrand r^{2a+1} * (analytic) regular at 0
    r = 0.5 * (z + 1.0)
    wr = 0.5 * w * 2.0 * r
    ja = bessel_j(a, r * math.sqrt(lam))
    jb = ja if lam == mu else bessel_j(a, r * math.sqrt(mu))
    # sort the products so the result is exactly symmetric in (lam, mu)
    prods = np.sort(wr * (ja * jb))
    return 0.25 * float(np.sum(prods))


def kernel_matrix(alpha, lam):
    """Symmetric matrix K(lam_i, lam_j) for distinct nodes (diagonal in closed form)."""
    a = float(alpha)
    lam = np.asarray(lam, dtype=float)
    A, B, J1 = bessel_ab(a, lam)
    num = np.outer(A, B) - np.outer(B, A)
    den = lam[:, None] - lam[None, :]
    near = np.abs(den) < NEAR_DIAG_RTOL * np.maximum(1.0, lam[:, None])
    np.fill_diagonal(near, False)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = num / den
    u = np.sqrt(lam)
    np.fill_diagonal(K, 0.25 * (A * A + J1 * J1 - (2.0 * a / u) * A * J1))
    if np.any(near):
        i, j = np.nonzero(near)
        K[i, j] = _near_diag(a, lam[i], lam[j])
    return K


def sigma_values(spec: WeightSpec, r, *, strict=True):
    """sigma(r) with tiny negative interpolation noise clamped to zero."""
    sig = np.asarray(spec.sigma(r), dtype=float)
    neg = sig < 0
    if np.any(neg):
        if np.all(sig[neg] > -SIGMA_CLAMP):
            sig = np.where(neg, 0.0, sig)
        elif strict and spec.in_unit_interval:
            raise DomainError("negative sigma value for a weight declared to lie in [0, 1]")
    return sig


def deformed_kernel_entry(fam: KernelFamily, lam, mu):
    """sqrt(sigma(x^-2 lam + t)) K(lam, mu) sqrt(sigma(x^-2 mu + t)).

    For weights outside [0, 1] that take negative values the sign is carried by
    the right factor, giving the (non-symmetric) kernel K sigma of the same determinant.
    """
    if fam.weight is None:
        raise DomainError("deformed kernel needs a weight")
    _check_positive(lam, mu)
    s1 = sigma_values(fam.weight, lam / fam.x**2 + fam.t)
    s2 = sigma_values(fam.weight, mu / fam.x**2 + fam.t)
    if isinstance(fam.weight, Zero) or (np.all(s1 == 0) or np.all(s2 == 0)):
        return 0.0 * np.asarray(s1 * s2) if np.ndim(lam) or np.ndim(mu) else 0.0
    k = bessel_kernel(fam.alpha, lam, mu)
    out = np.sqrt(np.abs(s1)) * k * np.sqrt(np.abs(s2)) * np.sign(s2)
    return float(out) if np.ndim(out) == 0 else out


# --- positive temperature -----------------------------------------------------

def _weight_cutoff(spec: WeightSpec, tol):
    """rho_end > 0 with 1/4 int_{rho_end}^inf |sigma| < tol."""
    end = spec.support_end()
    if end <= 0:
        return 0.0
    if math.isfinite(end):
        return end
    lo, hi = 0.0, 1.0
    while spec.tail_integral(hi) * 0.25 >= tol:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise AccuracyError("weight tail bound cannot reach tolerance",
                                diagnostic={"tail": spec.tail_integral(hi)})
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if spec.tail_integral(mid) * 0.25 >= tol:
            lo = mid
        else:
            hi = mid
    return hi


def pt_rule(alpha, spec: WeightSpec, lam_max, *, tol=PT_TAIL_TOL):
    """Nodes r and weights W with K~(l, m) ~ sum_q W_q J_a(r_q sqrt l) J_a(r_q sqrt m).

    The rho integral is taken in r = sqrt(rho) on panels split at rho = 1, 10, 100, ...
    and at the weight's break points; W includes sigma(r^2), the 2r Jacobian and 1/4.
    """
    if isinstance(spec, Zero):
        return np.zeros(0), np.zeros(0)
    rho_end = _weight_cutoff(spec, tol)
    if rho_end <= 0:
        return np.zeros(0), np.zeros(0)
    cuts = {0.0, rho_end}
    k = 0
    while 10.0**k < rho_end:
        cuts.add(10.0**k)
        k += 1
    for r, _ in spec.jumps():
        if 0 < r < rho_end:
            cuts.add(r)
    if isinstance(spec, Table):
        for r in (spec.nodes[0], spec.nodes[-1]):
            if 0 < r < rho_end:
                cuts.add(float(r))
    edges = np.sqrt(np.array(sorted(cuts)))
    freq = math.sqrt(max(lam_max, 1e-300))
    nodes, wts = [], []
    beta = 2.0 * float(alpha) + 1.0
    for a, b in zip(edges[:-1], edges[1:]):
        m = 20 + int(math.ceil(2.0 * (b - a) * freq))
        if a == 0.0:
            # the r-integrand behaves like r^(2 alpha + 1) at 0: Gauss-Jacobi absorbs it
            z, w = roots_jacobi(m, 0.0, beta)
            r = 0.5 * b * (z + 1.0)
            nodes.append(r)
            wts.append((0.5 * b) ** (beta + 1.0) * w * 2.0 * r / r**beta)
            continue
        z, w = leggauss(m)
        r = 0.5 * (b - a) * z + 0.5 * (a + b)
        nodes.append(r)
        wts.append(0.5 * (b - a) * w * 2.0 * r)
    r = np.concatenate(nodes)
    W = 0.25 * np.concatenate(wts) * sigma_values(spec, r * r, strict=False)
    return r, W


def positive_temperature_matrix(alpha, spec: WeightSpec, lam_a, lam_b=None):
    lam_a = np.atleast_1d(np.asarray(lam_a, dtype=float))
    lam_b = lam_a if lam_b is None else np.atleast_1d(np.asarray(lam_b, dtype=float))
    r, W = pt_rule(alpha, spec, max(lam_a.max(), lam_b.max()))
    if r.size == 0:
        return np.zeros((lam_a.size, lam_b.size))
    Ja = bessel_j(alpha, np.outer(r, np.sqrt(lam_a)))
    Jb = Ja if lam_b is lam_a else bessel_j(alpha, np.outer(r, np.sqrt(lam_b)))
    return Ja.T @ (W[:, None] * Jb)


def positive_temperature_kernel(alpha, spec: WeightSpec, lam, mu):
    """K~_sigma(lam, mu) = 1/4 int_0^inf sigma(rho) J_a(sqrt(rho lam)) J_a(sqrt(rho mu)) d rho."""
    a = float(BesselOrder(alpha))
    _check_positive(lam, mu)
    r, W = pt_rule(a, spec, max(lam, mu))
    if r.size == 0:
        return 0.0
    ja = bessel_j(a, r * math.sqrt(lam))
    jb = ja if lam == mu else bessel_j(a, r * math.sqrt(mu))
    return float(np.sum(np.sort(W * ja * jb)))
