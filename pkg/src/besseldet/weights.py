"""Weight functions sigma, their Stieltjes measures, and the Riemann-Liouville transform."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from . import _fd
from .errors import AccuracyError, DomainError, UnsupportedVariantError
from .specfun import BesselOrder, gamma


class WeightSpec:
    """Base class for the weight variants Zero, Fermi, Step and Table."""

    smooth = True

    def sigma(self, r):
        raise NotImplementedError

    def dsigma(self, r):
        raise UnsupportedVariantError(f"{type(self).__name__} has no pointwise derivative")

    def jumps(self):
        """List of (location, sigma(r+) - sigma(r-))."""
        return []

    def support_end(self):
        """Right end of the support, or inf."""
        return math.inf

    def tail_integral(self, r0):
        """Upper bound for the integral of |sigma| over (r0, inf)."""
        raise NotImplementedError

    def smooth_end(self, t, eps=1e-17):
        """A point beyond which |sigma'| integrates to less than eps (past t)."""
        return t

    @property
    def in_unit_interval(self):
        return True


@dataclass(frozen=True)
class Zero(WeightSpec):
    """sigma identically zero."""

    def sigma(self, r):
        return np.zeros_like(np.asarray(r, dtype=float)) + 0.0

    def dsigma(self, r):
        return np.zeros_like(np.asarray(r, dtype=float)) + 0.0

    def support_end(self):
        return -math.inf

    def tail_integral(self, r0):
        return 0.0


@dataclass(frozen=True)
class Fermi(WeightSpec):
    """Fermi factor sigma(r) = 1 / (1 + exp(beta (r - c)))."""

    center: float = 0.0
    slope: float = 1.0

    def __post_init__(self):
        if not self.slope > 0:
            raise DomainError("Fermi slope must be positive")

    def sigma(self, r):
        u = self.slope * (np.asarray(r, dtype=float) - self.center)
        # logistic via exp(-|u|) to avoid overflow
        e = np.exp(-np.abs(u))
        return np.where(u > 0, e / (1.0 + e), 1.0 / (1.0 + e))

    def dsigma(self, r):
        u = self.slope * (np.asarray(r, dtype=float) - self.center)
        e = np.exp(-np.abs(u))
        return -self.slope * e / (1.0 + e) ** 2

    def tail_integral(self, r0):
        u = self.slope * (r0 - self.center)
        return float(np.logaddexp(0.0, -u)) / self.slope

    def smooth_end(self, t, eps=1e-17):
        return max(t, self.center) + (-math.log(eps) + 5.0) / self.slope


@dataclass(frozen=True)
class Step(WeightSpec):
    """sigma = sum_j (1 - s_j) 1_[r_{j-1}, r_j) with r_0 = -inf and sigma = 0 past r_k."""

    breaks: tuple
    values: tuple
    smooth = False

    def __post_init__(self):
        b = tuple(float(v) for v in self.breaks)
        s = tuple(float(v) for v in self.values)
        if len(b) == 0 or len(b) != len(s):
            raise DomainError("Step needs equally many breaks and values (k >= 1)")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise DomainError("Step breaks must be strictly increasing")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", s)

    @property
    def in_unit_interval(self):
        return all(0.0 <= s <= 1.0 for s in self.values)

    @property
    def generating_function_valid(self):
        ss = self.values
        return self.in_unit_interval and all(a != b for a, b in zip(ss, ss[1:]))

    def sigma(self, r):
        r = np.asarray(r, dtype=float)
        idx = np.searchsorted(np.asarray(self.breaks), r, side="right")
        levels = np.append(1.0 - np.asarray(self.values), 0.0)
        return levels[idx]

    def jumps(self):
        s_ext = list(self.values) + [1.0]
        return [(r, s_ext[j] - s_ext[j + 1]) for j, r in enumerate(self.breaks)]

    def support_end(self):
        return self.breaks[-1]

    def tail_integral(self, r0):
        if r0 >= self.breaks[-1]:
            return 0.0
        edges = [-math.inf, *self.breaks]
        total = 0.0
        for j in range(len(self.values)):
            lo, hi = max(edges[j], r0), edges[j + 1]
            if hi > lo:
                if not math.isfinite(lo):
                    return math.inf
                total += abs(1.0 - self.values[j]) * (hi - lo)
        return total


@dataclass(frozen=True, eq=False)
class Table(WeightSpec):
    """Tabulated smooth sigma with a monotone cubic interpolant.

    Past the last node sigma(r) = v_N exp(-decay_exponent (r - r_N)); before the
    first node it is held at the first value.
    """

    nodes: np.ndarray
    values: np.ndarray
    decay_exponent: float = 1.0
    _interp: PchipInterpolator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2 or nodes.shape != values.shape:
            raise DomainError("Table needs matching 1-d node/value arrays (>= 2 nodes)")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("Table nodes must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DomainError("Table values must be finite")
        if self.decay_exponent < 0 or (self.decay_exponent == 0 and values[-1] != 0):
            raise DomainError("tail model needs decay_exponent > 0 unless the last value is 0")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_interp", PchipInterpolator(nodes, values, extrapolate=False))

    @property
    def in_unit_interval(self):
        return bool(np.all((self.values >= 0) & (self.values <= 1)))

    def _tail(self, r):
        if self.values[-1] == 0:
            return np.zeros_like(r)
        return self.values[-1] * np.exp(-self.decay_exponent * (r - self.nodes[-1]))

    def sigma(self, r):
        r = np.asarray(r, dtype=float)
        inner = self._interp(np.clip(r, self.nodes[0], self.nodes[-1]))
        out = np.where(r > self.nodes[-1], self._tail(r), inner)
        return np.where(r < self.nodes[0], self.values[0], out)

    def dsigma(self, r):
        r = np.asarray(r, dtype=float)
        inner = self._interp.derivative()(np.clip(r, self.nodes[0], self.nodes[-1]))
        out = np.where(r > self.nodes[-1], -self.decay_exponent * self._tail(r), inner)
        return np.where(r < self.nodes[0], 0.0, out)

    def tail_integral(self, r0):
        rn, vn, d = self.nodes[-1], self.values[-1], self.decay_exponent
        tail = 0.0 if vn == 0 else abs(vn) / d * math.exp(-d * max(r0 - rn, 0.0))
        if r0 >= rn:
            return tail
        if r0 < self.nodes[0]:
            return math.inf
        mask = self.nodes >= r0
        grid = np.concatenate([[r0], self.nodes[mask]])
        vals = np.abs(self.sigma(grid))
        # trapezoid of |sigma| with a 5% cushion for the interpolant overshoot
        return 1.05 * float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(grid))) + tail

    def smooth_end(self, t, eps=1e-17):
        if self.values[-1] == 0:
            return max(t, self.nodes[-1])
        d = self.decay_exponent
        extra = max(0.0, math.log(abs(self.values[-1]) / eps) / d)
        return max(t, self.nodes[-1]) + extra

    def to_csv(self, path):
        write_table_csv(self, path)


def write_table_csv(spec: Table, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# decay_exponent={spec.decay_exponent!r}\n")
        w = csv.writer(fh)
        w.writerow(["node", "value"])
        for r, v in zip(spec.nodes, spec.values):
            w.writerow([repr(float(r)), repr(float(v))])


def read_table_csv(path) -> Table:
    decay = None
    nodes, values = [], []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip() == "decay_exponent":
                    decay = float(val)
                continue
            a, b = line.split(",")[:2]
            try:
                nodes.append(float(a))
                values.append(float(b))
            except ValueError:
                continue  # column header
    if decay is None:
        raise DomainError(f"{path}: missing '# decay_exponent=' header")
    return Table(np.array(nodes), np.array(values), decay)


# --- pointwise evaluation ----------------------------------------------------

def eval_sigma(spec: WeightSpec, r):
    out = spec.sigma(r)
    return float(out) if np.ndim(r) == 0 else out


def eval_sigma_deriv(spec: WeightSpec, r):
    if not spec.smooth or isinstance(spec, Zero):
        raise UnsupportedVariantError(
            f"{type(spec).__name__} weights have no pointwise derivative; use integrate_dsigma")
    out = spec.dsigma(r)
    return float(out) if np.ndim(r) == 0 else out


# --- Stieltjes integrals -------------------------------------------------------

def integrate_dsigma(spec: WeightSpec, h, t, *, tol=1e-11):
    """Stieltjes integral of h against d sigma over (t, +inf).

    Smooth part by adaptive Gauss-Kronrod (QUADPACK), jumps added as atoms at
    break points strictly greater than t.
    """
    total = 0.0
    for r, jump in spec.jumps():
        if r > t:
            total += jump * float(h(r))
    if spec.smooth and not isinstance(spec, Zero):
        end = spec.smooth_end(t)
        if end > t:
            pts = None
            if isinstance(spec, Table):
                inside = spec.nodes[(spec.nodes > t) & (spec.nodes < end)]
                pts = inside[:: max(1, inside.size // 40)] if inside.size else None
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err = integrate.quad(lambda r: float(h(r)) * float(spec.dsigma(r)), t, end,
                                          points=pts, limit=500, epsabs=tol, epsrel=tol)
            if not err <= max(1e3 * tol, 1e-8 * abs(val)):
                raise AccuracyError("Stieltjes quadrature did not converge",
                                    diagnostic={"value": val, "error": err})
            total += val
    return total


def stieltjes_rule(spec: WeightSpec, t, n):
    """Fixed rule (nodes, weights) with sum w h(nodes) ~ integral of h d sigma over (t, inf).

    The smooth part uses Gauss-Legendre in k = sqrt(lambda - t), which absorbs the
    (lambda - t)^(alpha/2) behaviour of Bessel-type integrands at lambda = t.
    """
    nodes, wts = [], []
    if spec.smooth and not isinstance(spec, Zero):
        end = spec.smooth_end(t)
        if end > t:
            z, w = leggauss(n)
            kmax = math.sqrt(end - t)
            k = 0.5 * kmax * (z + 1.0)
            lam = t + k * k
            nodes.append(lam)
            wts.append(0.5 * kmax * w * 2.0 * k * spec.dsigma(lam))
    for r, jump in spec.jumps():
        if r > t:
            nodes.append(np.array([r]))
            wts.append(np.array([jump]))
    if not nodes:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(wts)


# --- Riemann-Liouville transform ---------------------------------------------

def _decay_cutoff(f, t, scale=1.0, eps=1e-18, *, relative=False):
    """Point past t where |f| has dropped below eps (probing outward).

    With ``relative`` the threshold is eps times the size of f just past t.
    """
    if relative:
        ref = float(np.max(np.abs([f(t), f(t + 0.5 * scale), f(t + scale)])))
        eps = max(eps * ref, 1e-300)
    r = t + scale
    for _ in range(200):
        probe = np.abs([f(r), f(r + 0.5 * scale), f(r + scale)])
        if np.all(probe < eps):
            return r + scale
        r = t + 2.0 * (r - t)
    raise AccuracyError("integrand does not decay", diagnostic={"t": t, "last_probe": r})


def rl_derivative_order(mu):
    """Smallest integer k > -mu + 1/2 (so the kernel exponent mu + k - 1 stays above -1/2)."""
    return max(0, math.floor(-mu + 0.5) + 1)


def riemann_liouville(mu, f, t, *, derivs=None, fd_step=0.05, tol=1e-12):
    """Riemann-Liouville integral (M_mu f)(t) = 1/Gamma(mu) int_t^inf (l - t)^(mu-1) f(l) dl.

    For mu <= 0 the integration-by-parts continuation with k derivatives of f is used.
    ``derivs`` may map k to the callable f^(k); otherwise derivatives come from
    8th-order central differences with step ``fd_step``.
    """
    mu = float(mu)
    k = rl_derivative_order(mu) if mu <= 0 else 0
    if k == 0:
        g = f
    elif derivs is not None and k in derivs:
        g = derivs[k]
    else:
        def g(lam):
            return _fd.derivative(f, lam, k, fd_step, order=8)
    expo = mu + k - 1.0
    coef = (-1.0) ** k / gamma(mu + k)
    end = _decay_cutoff(lambda r: float(f(r)), t, eps=1e-17, relative=True)
    # absolute tolerance on the scale of f near t, so deep-tail values keep their relative accuracy
    atol = tol * max(float(np.max(np.abs([f(t), f(t + 0.5), f(t + 1.0)]))), 1e-290)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head_end = min(t + 1.0, end)
        if expo == 0.0:
            val, err = integrate.quad(lambda r: float(g(r)), t, end, epsabs=atol, epsrel=tol, limit=400)
        else:
            val, err = integrate.quad(lambda r: float(g(r)), t, head_end, weight="alg",
                                      wvar=(expo, 0.0), epsabs=atol, epsrel=tol, limit=400)
            if end > head_end:
                v2, e2 = integrate.quad(lambda r: (r - t) ** expo * float(g(r)), head_end, end,
                                        epsabs=atol, epsrel=tol, limit=400)
                val, err = val + v2, err + e2
    if not err <= max(1e4 * atol, 1e-9 * abs(val)):
        raise AccuracyError("Riemann-Liouville quadrature did not converge",
                            diagnostic={"mu": mu, "t": t, "error": err})
    return coef * val


def sigma_from_v0(v0, alpha, *, lo=-2.0, hi=None, step=0.05, derivs=None, fd_step=0.05):
    """Tabulate sigma = 2^(2 alpha + 1) Gamma(alpha + 1) (M_{-alpha-1} v0) on [lo, hi].

    ``hi`` defaults to where |v0| falls below 1e-18; the exponential tail rate is
    fitted to the last two tabulated values.
    """
    a = float(BesselOrder(alpha))
    mu = -a - 1.0
    if hi is None:
        try:
            hi = _decay_cutoff(lambda r: float(v0(r)), lo)
        except AccuracyError:
            raise
        hi = max(hi, lo + 10 * step)
    nodes = np.arange(lo, hi + 0.5 * step, step)
    pref = 2.0 ** (2 * a + 1) * gamma(a + 1.0)
    zero_input = all(float(v0(r)) == 0.0 for r in nodes[:: max(1, nodes.size // 16)])
    if zero_input:
        vals = np.zeros_like(nodes)
    else:
        vals = np.array([pref * riemann_liouville(mu, v0, r, derivs=derivs, fd_step=fd_step)
                         for r in nodes])
    decay = 1.0
    if vals[-1] != 0 and vals[-2] != 0 and np.sign(vals[-1]) == np.sign(vals[-2]):
        rate = math.log(vals[-2] / vals[-1]) / (nodes[-1] - nodes[-2])
        decay = rate if rate > 0 else 1.0
    elif vals[-1] != 0:
        vals = vals.copy()
        vals[-1] = 0.0
    return Table(nodes, vals, decay)
