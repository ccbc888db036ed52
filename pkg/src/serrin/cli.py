"""Command line front end: constant tables, operator checks, solves and family sweeps.

Every command writes a JSON summary (schema 1) or a CSV table whose '#' header
lines carry the same summary. Exit status: 0 when every check passes, 2 when a
check fails, 1 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import __version__
from . import checks as ck
from .asymptotics import AsymptoticsWindow
from .fraclap import E2
from .green_ball import GreenGridSpec, torsion_constant
from .lane_emden import (SolveConfig, equation_residual, family_sweep, residual_radii, solve,
                         work_space)
from .quadrature import QuadratureSpec
from .special_fn import DomainError, Params

SCHEMA = 1
THREADS_ENV = "SERRIN_NUM_THREADS"
SWEEP_COLUMNS = ("r", "value", "predicted", "residual", "scaled_residual")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_radius(text: str) -> float:
    """A positive decimal or the token 1/e^2."""
    t = text.strip().replace(" ", "")
    if t in ("1/e^2", "e^-2", "exp(-2)"):
        return E2
    try:
        v = float(t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a radius: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError("radius must be positive")
    return v


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be >= 1")
    return n


def _thread_limit(n):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=n)


# ---------------------------------------------------------------------------
# serialization

def _jsonable(x):
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return {f.name: _jsonable(getattr(x, f.name)) for f in dataclasses.fields(x)}
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


@dataclasses.dataclass
class Outcome:
    results: dict
    checks: list
    columns: tuple = ()
    rows: list = dataclasses.field(default_factory=list)

    @property
    def passed(self):
        return ck.all_passed(self.checks)


def summary(command, config, out: Outcome) -> dict:
    return {
        "schema": SCHEMA,
        "tool": "serrin",
        "version": __version__,
        "command": command,
        "config": _jsonable(config),
        "passed": out.passed,
        "failed": [c.name for c in out.checks if not c.passed],
        "checks": [_jsonable(c.as_dict()) for c in out.checks],
        "results": _jsonable(out.results),
        "table": {"columns": list(out.columns), "rows": _jsonable(out.rows)},
    }


def render(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# serrin {doc['version']} {doc['command']} schema={doc['schema']}\n")
    buf.write(f"# config: {json.dumps(doc['config'], sort_keys=True)}\n")
    for c in doc["checks"]:
        buf.write(f"# check: {'PASS' if c['passed'] else 'FAIL'} {c['name']} "
                  f"value={c['value']} ({c['threshold']})\n")
    buf.write("# " + ",".join(doc["table"]["columns"]) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for row in doc["table"]["rows"]:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands

def _params(args):
    return Params(args.N, args.s)


def _quad(args):
    return QuadratureSpec(rel_tol=args.rel_tol, near_field_width=args.near_width)


def _grid(args):
    return GreenGridSpec(n_out=args.n_out)


def cmd_constants(args) -> Outcome:
    p = _params(args)
    checks = ck.constants_checks(p)
    if (p.N, p.s) == (3, 0.5):
        checks += ck.limit_checks()
    return Outcome(ck.constants_table(p), checks)


def cmd_verify_power(args) -> Outcome:
    p = _params(args)
    if args.tau or args.r:
        if not (args.tau and args.r):
            raise UsageError("--tau and --r must be given together")
        pairs = [(t, r) for t in args.tau for r in args.r]
    else:
        pairs = ck.power_pairs(p)
    checks, rows = ck.power_checks(p, pairs, _quad(args), args.tol)
    checks += ck.fundamental_checks(p, quad=_quad(args))
    return Outcome({"pairs": len(pairs)}, checks, ("tau",) + SWEEP_COLUMNS, [list(r) for r in rows])


def cmd_expansion(args) -> Outcome:
    p = _params(args)
    m = args.m if args.m is not None else (p.m0 if args.kind == "w" else 1.0)
    tau = args.tau if args.kind == "w_tau" else None
    if args.kind == "w_tau" and tau is None:
        tau = -1.0
    checks, pts = ck.expansion_checks(p, args.kind, m, tau, _quad(args), args.per_decade)
    rows = [[q.r, q.value, q.predicted, q.residual, q.scaled] for q in pts]
    return Outcome({"kind": args.kind, "m": m, "tau": tau,
                    "lead_ratios": [q.lead_ratio for q in pts]}, checks, SWEEP_COLUMNS, rows)


def cmd_green_check(args) -> Outcome:
    p = _params(args)
    R = args.radius
    spec = _grid(args)
    tors, u = ck.torsion_check(p, R, spec=spec)
    checks = [tors, ck.round_trip_check(p, R, _quad(args), spec=spec)]
    checks += ck.comparison_checks(p, R, args.pairs, args.seed, spec=spec)
    r = u.grid[u.grid < R]
    exact = torsion_constant(p) * (R * R - r * r) ** p.s
    vals = u.values[u.grid < R]
    rows = [[a, b, c, b - c, b / c - 1] for a, b, c in zip(r, vals, exact)]
    return Outcome({"radius": R}, checks, SWEEP_COLUMNS, rows)


def _solve_config(args) -> SolveConfig:
    return SolveConfig(_params(args), ball_radius=args.radius, max_iters=args.max_iters,
                       iter_tol=args.iter_tol, grid=_grid(args), quad=_quad(args),
                       method=args.method, family_k=args.family_k)


def _window(args, R):
    if args.window_lo is None and args.window_hi is None:
        return AsymptoticsWindow.default(R)
    d = AsymptoticsWindow.default(R)
    return AsymptoticsWindow(args.window_lo or d.r_lo, args.window_hi or d.r_hi)


def _solve(args):
    cfg = _solve_config(args)
    window = _window(args, cfg.ball_radius)
    u, rep = solve(cfg, window)
    checks = ck.solve_checks(rep, args.residual_tol)
    results = {"report": rep}
    if rep.converged:
        bc, extra = ck.blowup_checks(u, cfg.params, window)
        checks += bc
        results["asymptotics"] = extra
    return cfg, window, u, rep, checks, results


def cmd_solve(args) -> Outcome:
    cfg, window, u, rep, checks, results = _solve(args)
    rows = []
    if rep.converged:
        p = cfg.params
        radii = residual_radii(work_space(cfg))
        scaled = equation_residual(p, u, radii, cfg.quad)
        weight = radii ** p.N * (-np.log(radii)) ** (1 - p.m0)
        v0 = p.K_s * radii ** p.tau_fund * (-np.log(radii)) ** p.m0
        rows = [[r, float(u(r)), v, s / w, s] for r, v, s, w in zip(radii, v0, scaled, weight)]
    return Outcome(results, checks, SWEEP_COLUMNS, rows)


def cmd_family(args) -> Outcome:
    cfg, window, u, rep, checks, results = _solve(args)
    if not rep.converged:
        checks.append(ck.Check("family needs a converged base solve", False, rep.message, "converged"))
        return Outcome(results, checks)
    entries = family_sweep(cfg, args.l, u=u, window=window)
    fc, slope = ck.family_checks(entries, rep, cfg.params)
    p = cfg.params
    rows = []
    for e in sorted(entries, key=lambda e: e.l):
        pred = rep.second_order_k + p.K_s * p.m0 * math.log(e.l)
        rows.append([e.l, e.k, pred, e.k - pred, e.fit_quality, e.l1_norm])
    results["family"] = entries
    results["slope"] = slope
    results["target_slope"] = p.K_s * p.m0
    return Outcome(results, checks + fc, ("l", "k", "predicted_k", "residual", "fit_quality",
                                          "l1_norm"), rows)


def cmd_report(args) -> Outcome:
    p = _params(args)
    results, checks = {}, []
    for name, fn in (("constants", cmd_constants), ("verify_power", cmd_verify_power)):
        o = fn(args)
        results[name] = o.results
        checks += o.checks
    if (p.N, p.s) == (3, 0.5):
        checks += ck.criterion3_checks(_quad(args))
    else:
        checks += ck.expansion_checks(p, "w", p.m0, None, _quad(args))[0]
    tors, _ = ck.torsion_check(p, 1.0, spec=_grid(args))
    checks += [tors, ck.round_trip_check(p, 1.0, _quad(args), spec=_grid(args))]
    checks += ck.comparison_checks(p, 1.0, 10, 0, spec=_grid(args))
    o = cmd_family(args)
    results.update(o.results)
    checks += o.checks
    checks += ck.oracle_checks(p)
    return Outcome(results, checks, o.columns, o.rows)


COMMANDS = {
    "constants": cmd_constants,
    "verify-power": cmd_verify_power,
    "expansion": cmd_expansion,
    "green-check": cmd_green_check,
    "solve": cmd_solve,
    "family": cmd_family,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--N", type=int, default=3, help="dimension")
    common.add_argument("--s", type=float, default=0.5, help="order in (0, 1)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--output", default="-", help="output path, '-' for stdout")
    common.add_argument("--rel-tol", type=float, default=1e-8, help="quadrature tolerance")
    common.add_argument("--near-width", type=float, default=0.25,
                        help="principal-value window half-width in ln r")
    common.add_argument("--n-out", type=int, default=400, help="log-spaced Green output nodes")

    solver = _Parser(add_help=False)
    solver.add_argument("--radius", type=parse_radius, default=E2,
                        help="ball radius, a decimal or 1/e^2")
    solver.add_argument("--max-iters", type=int, default=60)
    solver.add_argument("--iter-tol", type=float, default=1e-8)
    solver.add_argument("--method", choices=("monotone", "newton"), default="monotone")
    solver.add_argument("--family-k", type=float, default=0.0,
                        help="log offset of the inner tail prescribed to Newton")
    solver.add_argument("--residual-tol", type=float, default=1e-6)
    solver.add_argument("--window-lo", type=float, default=None)
    solver.add_argument("--window-hi", type=float, default=None)

    ap = _Parser(prog="serrin", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"serrin {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("constants", parents=[common], help="constant table and identities")
    vp = sub.add_parser("verify-power", parents=[common], help="operator on global powers")
    vp.add_argument("--tau", type=float, nargs="*", default=[])
    vp.add_argument("--r", type=float, nargs="*", default=[])
    vp.add_argument("--tol", type=float, default=1e-5)
    ex = sub.add_parser("expansion", parents=[common], help="log-profile expansion sweep")
    ex.add_argument("--kind", choices=("w", "v", "w_tau"), default="w")
    ex.add_argument("--m", type=float, default=None)
    ex.add_argument("--tau", type=float, default=None)
    ex.add_argument("--per-decade", type=int, default=8)
    gc = sub.add_parser("green-check", parents=[common], help="Green operator checks")
    gc.add_argument("--radius", type=parse_radius, default=1.0)
    gc.add_argument("--pairs", type=int, default=10)
    gc.add_argument("--seed", type=int, default=0)
    sub.add_parser("solve", parents=[common, solver], help="singular solution on a ball")
    fa = sub.add_parser("family", parents=[common, solver], help="scaling family sweep")
    fa.add_argument("--l", type=float, nargs="+", default=[1.0, math.e, math.e ** 2, math.e ** 3])
    rp = sub.add_parser("report", parents=[common, solver], help="all checks in one summary")
    rp.add_argument("--tau", type=float, nargs="*", default=[])
    rp.add_argument("--r", type=float, nargs="*", default=[])
    rp.add_argument("--tol", type=float, default=1e-5)
    rp.add_argument("--l", type=float, nargs="+", default=[1.0, math.e, math.e ** 2, math.e ** 3])
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        n = thread_count()
        _params(args)
        _quad(args)
        if getattr(args, "l", None) and min(args.l) < 1:
            raise UsageError("scale factors must be >= 1")
        if hasattr(args, "max_iters"):
            _solve_config(args)
    except (UsageError, DomainError, ValueError) as exc:
        print(f"serrin: error: {exc}", file=sys.stderr)
        return 1
    try:
        with _thread_limit(n):
            out = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"serrin: error: {exc}", file=sys.stderr)
        return 1
    config = dict(vars(args))
    config["threads"] = n
    doc = summary(args.command, config, out)
    text = render(doc, args.format)
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    for c in out.checks:
        if not c.passed:
            print(f"check failed: {c.name} (value {c.value}, need {c.threshold})", file=sys.stderr)
    return 0 if out.passed else 2


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
