"""Small-x behaviour of v and the explicit boundary value problem construction.

As x -> 0+,

    v - x t/2 + (4 alpha^2 - 1)/(8x) = -d/dx log F
        = x^(2 alpha + 1) 2^(-2 alpha - 1) / Gamma(alpha + 1)^2 int_t^inf (lambda - t)^alpha sigma d lambda + o(...),

and choosing sigma = 2^(2 alpha + 1) Gamma(alpha + 1) M_{-alpha-1} v0 makes the
coefficient equal to v0(t).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from . import _fd
from .errors import DomainError
from .fredholm import DEFAULT_NODES, log_det_lattice
from .kernel import KernelFamily
from .specfun import BesselOrder, gamma
from .weights import WeightSpec, Zero, sigma_from_v0

DEFAULT_PROBES = (0.04, 0.02, 0.01)


@dataclass
class BoundaryFit:
    limit: float
    slope: float
    fit_residual: float
    probes: list
    ratios: list


def _dlog(fam: KernelFamily, x, t, n=DEFAULT_NODES):
    """d/dx log F at (x, t) by an 8th-order stencil of width proportional to x."""
    h = 0.1 * x
    offs, w = _fd.central_weights(1, 8)
    xs = x + h * np.asarray(offs, dtype=float)
    L, sign = log_det_lattice(fam, xs, [t], n)
    if np.any(sign <= 0):
        raise DomainError(f"F <= 0 near x = {x}, t = {t}")
    return float(np.dot(w, L[:, 0])) / h


def boundary_fit(fam: KernelFamily, t, x_probe=DEFAULT_PROBES, n=DEFAULT_NODES) -> BoundaryFit:
    """Least-squares fit of -d/dx log F / x^(2 alpha + 1) = A + B x over the probes."""
    a = fam.alpha
    xp = np.asarray(sorted(x_probe, reverse=True), dtype=float)
    if xp.size < 2 or np.any(xp <= 0):
        raise DomainError("need at least two positive probe points")
    ratios = np.array([-_dlog(fam, x, t, n) / x ** (2 * a + 1) for x in xp])
    if isinstance(fam.weight, Zero) or fam.weight is None:
        return BoundaryFit(0.0, 0.0, 0.0, xp.tolist(), ratios.tolist())
    V = np.vstack([np.ones_like(xp), xp]).T
    coef, *_ = np.linalg.lstsq(V, ratios, rcond=None)
    resid = float(np.max(np.abs(V @ coef - ratios))) if xp.size > 2 else 0.0
    return BoundaryFit(float(coef[0]), float(coef[1]), resid, xp.tolist(), ratios.tolist())


def boundary_limit(fam: KernelFamily, t, x_probe=DEFAULT_PROBES, n=DEFAULT_NODES) -> float:
    """Extrapolated limit of [v - x t/2 + (4 alpha^2 - 1)/(8x)] / x^(2 alpha + 1) as x -> 0+."""
    return boundary_fit(fam, t, x_probe, n).limit


def boundary_target(alpha, spec: WeightSpec, t) -> float:
    """2^(-2 alpha - 1) / Gamma(alpha + 1)^2 int_t^inf (lambda - t)^alpha sigma(lambda) d lambda."""
    a = float(BesselOrder(alpha))
    if isinstance(spec, Zero):
        return 0.0
    end = spec.support_end()
    if not math.isfinite(end):
        end = spec.smooth_end(t, 1e-30) + 10.0
    if end <= t:
        return 0.0
    # split at jumps; the algebraic weight (lambda - t)^alpha goes on the first piece only
    cuts = [t] + sorted(r for r, _ in spec.jumps() if t < r < end) + [end]
    val = 0.0
    for k, (lo, hi) in enumerate(zip(cuts[:-1], cuts[1:])):
        if k == 0:
            part, _ = integrate.quad(lambda lam: float(spec.sigma(lam)), lo, hi, weight="alg",
                                     wvar=(a, 0.0), limit=400, epsabs=1e-14, epsrel=1e-12)
        else:
            part, _ = integrate.quad(lambda lam: (lam - t) ** a * float(spec.sigma(lam)), lo, hi,
                                     limit=400, epsabs=1e-14, epsrel=1e-12)
        val += part
    return 2.0 ** (-2 * a - 1) / gamma(a + 1.0) ** 2 * val


@dataclass
class BoundaryReport:
    alpha: float
    entries: list = field(default_factory=list)

    @property
    def max_rel_err(self):
        errs = [e["rel_err"] for e in self.entries if e["rel_err"] is not None]
        return max(errs) if errs else math.inf

    def to_json(self):
        return json.dumps({"alpha": self.alpha, "entries": self.entries,
                           "max_rel_err": self.max_rel_err}, sort_keys=True)


def solve_boundary_value_problem(v0, alpha, x_probe=DEFAULT_PROBES, t_probe=(0.0, 1.0),
                                 *, sigma=None, n=DEFAULT_NODES) -> BoundaryReport:
    """Build sigma from v0, evaluate the boundary limit of v at each t, compare with v0(t).

    Per-probe failures (F = 0 for weights outside [0, 1]) are recorded in the report.
    """
    a = float(BesselOrder(alpha))
    lo = min(t_probe) - 2.0
    spec = sigma if sigma is not None else sigma_from_v0(v0, a, lo=lo)
    report = BoundaryReport(a)
    for t in t_probe:
        target = float(v0(t))
        try:
            lim = boundary_limit(KernelFamily(a, spec, 1.0, t), t, x_probe, n)
            rel = abs(lim - target) / max(1.0, abs(target))
            report.entries.append({"alpha": a, "t": float(t), "limit": lim, "target": target,
                                   "rel_err": rel})
        except DomainError as exc:
            report.entries.append({"alpha": a, "t": float(t), "limit": None, "target": target,
                                   "rel_err": None, "error": str(exc)})
    return report


def fit_as_dict(fit: BoundaryFit):
    return asdict(fit)
