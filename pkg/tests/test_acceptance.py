"""Acceptance criteria 1-8, one pass/fail line each.

Run with pytest (the lines appear in the terminal summary) or directly with
`python tests/test_acceptance.py`.
"""

import math
import sys
import warnings

from serrin import checks as ck
from serrin.asymptotics import AsymptoticsWindow
from serrin.lane_emden import SolveConfig, family_sweep, solve
from serrin.special_fn import Params

try:
    from conftest import ACCEPTANCE_LINES, NEWTON_RADIUS
except ImportError:  # run as a script from elsewhere
    ACCEPTANCE_LINES, NEWTON_RADIUS = {}, 1e-2

FAMILY_L = (1.0, math.e, math.e ** 2, math.e ** 3)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def report(n, title, checks):
    ok = ck.all_passed(checks)
    bad = [c for c in checks if not c.passed]
    detail = "; ".join(f"{c.name} = {_fmt(c.value)} (need {c.threshold})" for c in bad)
    line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}"
    if detail:
        line += f": {detail}"
    ACCEPTANCE_LINES[n] = line
    print(line)
    return ok


def criterion1():
    out = []
    for N, s in ck.ACCEPTANCE_PARAMS:
        out += ck.constants_checks(Params(N, s))
    return out + ck.limit_checks()


def criterion2():
    out = []
    for N, s in ck.ACCEPTANCE_PARAMS:
        p = Params(N, s)
        out += ck.power_checks(p)[0]
        out += ck.fundamental_checks(p)
    return out


def criterion3():
    return ck.criterion3_checks()


def criterion4():
    p = Params(3, 0.5)
    tors, _ = ck.torsion_check(p, 1.0, nodes=50)
    return [tors, ck.round_trip_check(p, 1.0)] + ck.comparison_checks(p, 1.0, pairs=10)


def criterion5(monotone):
    _, rep = monotone
    return ck.solve_checks(rep, residual_tol=1e-6)


def criterion6(newton):
    u, rep = newton
    p = Params(3, 0.5)
    if not rep.converged:
        return [ck.Check("base solve converged", False, rep.message, "converged")]
    return ck.blowup_checks(u, p, AsymptoticsWindow.default(NEWTON_RADIUS))[0]


def criterion7(newton, config):
    u, rep = newton
    if not rep.converged:
        return [ck.Check("base solve converged", False, rep.message, "converged")]
    entries = family_sweep(config, FAMILY_L, u=u)
    return ck.family_checks(entries, rep, config.params)[0]


def criterion8():
    return ck.oracle_checks(Params(3, 0.5))


# ---------------------------------------------------------------------------

def test_criterion1_constants():
    assert report(1, "constants", criterion1())


def test_criterion2_quadrature_vs_closed_form():
    assert report(2, "operator on powers and the fundamental solution", criterion2())


def test_criterion3_expansions():
    assert report(3, "expansions of the log profiles", criterion3())


def test_criterion4_green_operator():
    assert report(4, "Green operator", criterion4())


def test_criterion5_monotone_solver(monotone_solve):
    assert report(5, "monotone iteration at r = e^-2", criterion5(monotone_solve))


def test_criterion6_blowup_checks(newton_solve):
    assert report(6, f"blow-up checks on the solution at r = {NEWTON_RADIUS:g}",
                  criterion6(newton_solve))


def test_criterion7_family(newton_solve, newton_config):
    assert report(7, "scaling family and second-order coefficient",
                  criterion7(newton_solve, newton_config))


def test_criterion8_synthetic_oracles():
    assert report(8, "synthetic-field oracles", criterion8())


def main():
    warnings.simplefilter("ignore", RuntimeWarning)
    p = Params(3, 0.5)
    results = [report(1, "constants", criterion1()),
               report(2, "operator on powers and the fundamental solution", criterion2()),
               report(3, "expansions of the log profiles", criterion3()),
               report(4, "Green operator", criterion4())]
    mono = solve(SolveConfig(p))
    results.append(report(5, "monotone iteration at r = e^-2", criterion5(mono)))
    cfg = SolveConfig(p, ball_radius=NEWTON_RADIUS, method="newton")
    newton = solve(cfg)
    results.append(report(6, f"blow-up checks on the solution at r = {NEWTON_RADIUS:g}",
                          criterion6(newton)))
    results.append(report(7, "scaling family and second-order coefficient",
                          criterion7(newton, cfg)))
    results.append(report(8, "synthetic-field oracles", criterion8()))
    return 0 if all(results) else 2


if __name__ == "__main__":
    sys.exit(main())
