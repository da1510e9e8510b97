"""Command-line front end: ``besseldet det | grid | verify <check>``.

JSON goes to stdout, diagnostics to stderr.  Exit codes: 0 pass, 1 failed check,
2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import boundary, fredholm, painleve, sturm
from . import pde_verify as pde
from .errors import AccuracyError, DomainError, NumericError, UnsupportedVariantError
from .kernel import KernelFamily
from .weights import Fermi, Step, Zero, read_table_csv

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_weight(text):
    """zero | fermi:c,beta | step:r1,s1;r2,s2 | table:PATH"""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "zero":
            return Zero()
        if kind == "fermi":
            c, beta = (float(v) for v in rest.split(","))
            return Fermi(c, beta)
        if kind == "step":
            pairs = [p.split(",") for p in rest.split(";") if p.strip()]
            return Step(tuple(float(p[0]) for p in pairs), tuple(float(p[1]) for p in pairs))
        if kind == "table":
            return read_table_csv(rest)
    except (ValueError, IndexError, OSError, DomainError) as exc:
        raise UsageError(f"bad weight {text!r}: {exc}") from exc
    raise UsageError(f"unknown weight kind {kind!r}")


def parse_range(text):
    """a:b:n -> n equally spaced points from a to b."""
    try:
        a, b, n = text.split(":")
        n = int(n)
        a, b = float(a), float(b)
    except ValueError as exc:
        raise UsageError(f"bad range {text!r} (expected a:b:n)") from exc
    if n < 1 or (n == 1 and a != b):
        raise UsageError(f"bad range {text!r}")
    return np.linspace(a, b, n), (b - a) / (n - 1) if n > 1 else 0.0


def parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def _clean(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _emit(obj):
    # strict JSON: non-finite floats become null
    print(json.dumps(_clean(obj), sort_keys=True))


def _family(args, x=1.0, t=0.0):
    try:
        return KernelFamily(args.alpha, parse_weight(args.weight), x, t)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def _check(name, residual, tol, extra=None, also=True):
    ok = bool(np.isfinite(residual) and residual <= tol and also)
    out = {"check": name, "max_residual": float(residual), "tolerance": tol, "pass": ok}
    out.update(extra or {})
    _emit(out)
    return EXIT_PASS if ok else EXIT_FAIL


# --- det / grid -------------------------------------------------------------------

def cmd_det(args):
    fam = _family(args, args.x, args.t)
    route = args.route
    if route == "nystrom":
        res = fredholm.fredholm_det(fam, fredholm.build_quadrature(fam, args.nodes, args.mode))
        F, logF, n, tail = res.F, res.logF, res.n_used, res.tail_bound
    elif route == "pt":
        if args.t != 0:
            raise UsageError("the positive-temperature route needs --t 0")
        res = fredholm.fredholm_det_pt(args.alpha, fam.weight, args.x, args.nodes)
        F, logF, n, tail = res.F, res.logF, res.n_used, res.tail_bound
    elif route.startswith("series:"):
        try:
            N = int(route.split(":", 1)[1])
        except ValueError as exc:
            raise UsageError(f"bad route {route!r}") from exc
        if not 0 <= N <= 3:
            raise UsageError("series order must be 0..3")
        F = fredholm.series_oracle(fam, N)
        logF = math.log(F) if F > 0 else float("nan")
        n, tail = N, float("nan")
    else:
        raise UsageError(f"unknown route {route!r}")
    _emit({"alpha": args.alpha, "x": args.x, "t": args.t, "F": F, "logF": logF,
           "route": route, "n": n, "tail_bound": tail})
    return EXIT_PASS


def cmd_grid(args):
    xs, hx = parse_range(args.x_range)
    ts, ht = parse_range(args.t_range)
    h_x = args.h_x or (hx if hx else 0.05)
    h_t = args.h_t or (ht if ht else 0.05)
    fam = _family(args)
    try:
        fld = fredholm.v_field(fam, xs, ts, h_x, h_t, args.nodes, args.mode)
    except DomainError as exc:
        if "grid" in str(exc) or "exceed" in str(exc):
            raise UsageError(str(exc)) from exc
        raise
    fredholm.write_grid_csv(fld, args.out)
    _emit({"out": args.out, "rows": int(xs.size * ts.size), "h_x": h_x, "h_t": h_t})
    return EXIT_PASS


# --- verify -----------------------------------------------------------------------

def _field_from_csv(path, alpha):
    xg, tg, L, _ = fredholm.read_grid_csv(path)
    if xg.size < 2 * fredholm.X_MARGIN + 1 or tg.size < 2 * fredholm.T_MARGIN + 1:
        raise UsageError("grid too small for the residual stencils")
    h_x, h_t = xg[1] - xg[0], tg[1] - tg[0]
    ix = slice(fredholm.X_MARGIN, xg.size - fredholm.X_MARGIN)
    it = slice(fredholm.T_MARGIN, tg.size - fredholm.T_MARGIN)
    v = fredholm.v_from_lattice(alpha, L, xg[ix], tg[it], h_x) if xg.size >= 9 else None
    return fredholm.VField(alpha, xg[ix], tg[it], v, L[ix, it], h_x, h_t, L)


def _verify_pde(args, which):
    tol = args.tol if args.tol is not None else (5e-3 if which == "pde" else 1e-2)
    fn = pde.pde_residual if which == "pde" else pde.differentiated_residual
    if args.grid:
        fld = _field_from_csv(args.grid, args.alpha)
        return _check(which, float(np.max(np.abs(fn(fld)))), tol, {"source": args.grid})
    xs, _ = parse_range(args.x_range)
    ts, _ = parse_range(args.t_range)
    fam = _family(args)
    coarse = float(np.max(np.abs(fn(fredholm.v_field(fam, xs, ts, args.h, args.h, args.nodes)))))
    extra = {"h": args.h}
    conv = True
    if not args.no_convergence:
        fine = float(np.max(np.abs(fn(fredholm.v_field(fam, xs, ts, args.h / 2, args.h / 2, args.nodes)))))
        conv = pde.convergence_ok(coarse, fine)
        extra.update({"residual_half_step": fine, "convergence_ok": conv})
    return _check(which, coarse, tol, extra, also=conv)


def cmd_verify(args):
    c = args.check
    if c in ("pde", "pde-diff"):
        return _verify_pde(args, "pde" if c == "pde" else "pde-diff")
    if c == "special-solution":
        mus, nus = parse_floats(args.mus), parse_floats(args.nus)
        if len(mus) != len(nus) or not mus:
            raise UsageError("--mus and --nus need the same positive length")
        fld = pde.special_solution_field(args.alpha, args.x, args.t, mus, nus, args.h)
        tol = args.tol if args.tol is not None else 1e-5
        return _check(c, float(np.max(np.abs(pde.pde_residual(fld)))), tol)
    if c == "nonlocal":
        fam = _family(args, args.x, args.t)
        tol = args.tol if args.tol is not None else 1e-4
        return _check(c, abs(sturm.verify_nonlocal(fam, args.x)), tol)
    if c == "integral-rep":
        fam = _family(args, args.x, args.t)
        res = sturm.verify_integral_rep(fam, args.x)
        logF = float(fredholm.log_det_lattice(fam, [args.x], [args.t])[0][0, 0])
        tol = args.tol if args.tol is not None else 1e-4 * abs(logF) + 1e-6
        return _check(c, abs(res), tol, {"logF": logF})
    if c == "ft-eq":
        fam = _family(args, args.x, args.t)
        if not fam.weight.smooth:
            raise UsageError("the f_t identity is checked for smooth weights only")
        tol = args.tol if args.tol is not None else 1e-3
        r1 = abs(sturm.verify_f_t_equation(fam, args.alpha, args.lam, args.t, args.x, args.h_t))
        r2 = abs(sturm.verify_f_t_equation(fam, args.alpha, args.lam, args.t, args.x, args.h_t / 2))
        conv = pde.convergence_ok(r1, r2, factor=3.0)
        return _check(c, r1, tol, {"residual_half_step": r2, "convergence_ok": conv}, also=conv)
    if c == "idpv":
        if args.t != 0:
            raise UsageError("idpv is stated at t = 0")
        fam = _family(args, 1.0, 0.0)
        tol = args.tol if args.tol is not None else 1e-3
        return _check(c, sturm.verify_idpv(fam, args.alpha, args.x), tol)
    if c == "tw":
        if not 0 <= args.s <= 1:
            raise UsageError("--s must lie in [0, 1]")
        sol = painleve.solve_tw(args.alpha, args.s, args.x)
        fam = KernelFamily(args.alpha, Step((1.0,), (args.s,)), math.sqrt(args.x), 0.0)
        det = fredholm.fredholm_det(fam).logF
        ode = painleve.tw_log_det(sol, args.x)
        tol = args.tol if args.tol is not None else 1e-6
        return _check(c, abs(det - ode), tol, {"logF_det": det, "logF_painleve": ode})
    if c == "coupled":
        pairs = [parse_floats(p) for p in args.breaks.split(";") if p.strip()]
        if not pairs or any(len(p) != 2 for p in pairs):
            raise UsageError("--breaks expects r1,s1;r2,s2;...")
        try:
            spec = Step(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
        except DomainError as exc:
            raise UsageError(str(exc)) from exc
        sol = painleve.solve_coupled(args.alpha, pairs, args.x)
        det = fredholm.fredholm_det(KernelFamily(args.alpha, spec, math.sqrt(args.x), 0.0)).logF
        ode = painleve.coupled_log_det(sol, args.x)
        tol = args.tol if args.tol is not None else 1e-5
        return _check(c, abs(det - ode), tol, {"logF_det": det, "logF_painleve": ode})
    if c == "boundary":
        probes = parse_floats(args.probes)
        if args.v0:
            if args.v0 not in ("exp", "zero"):
                raise UsageError("--v0 must be 'exp' or 'zero'")
            v0 = (lambda t: math.exp(-t)) if args.v0 == "exp" else (lambda t: 0.0)
            rep = boundary.solve_boundary_value_problem(v0, args.alpha, probes, [args.t])
            tol = args.tol if args.tol is not None else 2e-2
            entry = rep.entries[0]
            return _check(c, rep.max_rel_err, tol, {"limit": entry["limit"], "target": entry["target"]})
        fam = _family(args, 1.0, args.t)
        lim = boundary.boundary_limit(fam, args.t, probes)
        target = boundary.boundary_target(args.alpha, fam.weight, args.t)
        rel = abs(lim - target) / max(abs(target), 1e-300) if target else abs(lim)
        tol = args.tol if args.tol is not None else 1e-2
        return _check(c, rel, tol, {"alpha": args.alpha, "t": args.t, "limit": lim,
                                    "target": target, "rel_err": rel})
    raise UsageError(f"unknown check {c!r}")


# --- parser -------------------------------------------------------------------------

def _common(p, weight=True):
    p.add_argument("--alpha", type=float, default=0.0, help="Bessel order (> -1)")
    if weight:
        p.add_argument("--weight", default="zero",
                       help="zero | fermi:c,beta | step:r1,s1;r2,s2 | table:PATH")
    p.add_argument("--nodes", type=int, default=fredholm.DEFAULT_NODES, help="Nystrom nodes")


def build_parser():
    ap = argparse.ArgumentParser(prog="besseldet", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("det", help="evaluate F_sigma(x, t)")
    _common(p)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--route", default="nystrom", help="nystrom | pt | series:N")
    p.add_argument("--mode", default="legendre", choices=["legendre", "jacobi", "auto"])
    p.set_defaults(func=cmd_det)

    p = sub.add_parser("grid", help="log F and v on a grid, written as CSV")
    _common(p)
    p.add_argument("--x-range", required=True, help="a:b:n")
    p.add_argument("--t-range", required=True, help="a:b:n")
    p.add_argument("--h-x", type=float, default=None, help="FD step in x (default: grid spacing)")
    p.add_argument("--h-t", type=float, default=None, help="FD step in t (default: grid spacing)")
    p.add_argument("--mode", default="legendre", choices=["legendre", "jacobi", "auto"])
    p.add_argument("--threads", type=int, default=None, help="accepted for compatibility; runs serially")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("verify", help="run one identity check")
    p.add_argument("check", choices=["pde", "pde-diff", "nonlocal", "integral-rep", "ft-eq", "idpv",
                                     "tw", "coupled", "boundary", "special-solution"])
    _common(p)
    p.add_argument("--x", type=float, default=1.0)
    p.add_argument("--t", type=float, default=0.0)
    p.add_argument("--tol", type=float, default=None, help="override the default tolerance")
    p.add_argument("--grid", default=None, help="grid CSV to check (pde, pde-diff)")
    p.add_argument("--x-range", default="0.5:2:31")
    p.add_argument("--t-range", default="-1:1:41")
    p.add_argument("--h", type=float, default=0.05)
    p.add_argument("--no-convergence", action="store_true", help="skip the h/2 re-run")
    p.add_argument("--lam", type=float, default=2.0)
    p.add_argument("--h-t", type=float, default=0.05)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--breaks", default="0.5,0.3;1,0.7")
    p.add_argument("--probes", default="0.04,0.02,0.01")
    p.add_argument("--v0", default=None, help="exp | zero: run the boundary value construction")
    p.add_argument("--mus", default="1")
    p.add_argument("--nus", default="2")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_verify)
    return ap


def _glue_ranges(argv):
    # "--t-range -1:1:21" would read the value as a flag; glue it to its option
    out = []
    it = iter(argv)
    for tok in it:
        if tok in ("--x-range", "--t-range"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = ap.parse_args(_glue_ranges(argv))  # exits with 2 on bad flags
    try:
        if args.alpha <= -1 or not math.isfinite(args.alpha):
            raise UsageError("--alpha must exceed -1")
        return args.func(args)
    except UsageError as exc:
        print(f"besseldet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UnsupportedVariantError, OSError) as exc:
        print(f"besseldet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, AccuracyError, DomainError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"besseldet: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
