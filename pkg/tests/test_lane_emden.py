import math

import numpy as np
import pytest

from serrin.fields import analytic_field, log_grid, PowerLogTail
from serrin.fraclap import fraclap_radial
from serrin.lane_emden import (SingularTail, SolveConfig, _solve_newton, family_sweep,
                               initial_profile, iterate_chain, l1_norm, l1_unit_ball,
                               refine_error_exponent, sandwich_constant, scale_solution,
                               weighted_norm, work_space)
from serrin.asymptotics import leading_ratio, second_order_profile
from serrin.special_fn import Params

P3 = Params(3, 0.5)


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(P3, ball_radius=0.5)
    with pytest.raises(ValueError):
        SolveConfig(P3, ball_radius=0.0)
    with pytest.raises(ValueError):
        SolveConfig(P3, max_iters=0)
    with pytest.raises(ValueError):
        SolveConfig(P3, method="picard")


def test_initial_profile():
    v = initial_profile(SolveConfig(P3))
    r = math.exp(-4)
    assert v(r) == pytest.approx(P3.K_s * r ** -2 / 16, rel=1e-13)
    assert v.inner_tail.tau == -2.0 and v.inner_tail.m == -2.0
    assert v(0.5) > 0 and v(1.0) == 0.0 and v(3.0) == 0.0


def test_initial_profile_is_subsolution():
    """(-Delta)^s v0 <= v0^{p*} on the small-r side where the expansion applies."""
    v = initial_profile(SolveConfig(P3))
    for r in (1e-8, 1e-5, 1e-3):
        assert fraclap_radial(P3, v, r).value <= v(r) ** P3.p_star


def test_singular_tail_matches_direct_formula():
    t = SingularTail(P3, 1.7)
    r = np.array([1e-30, 1e-12])
    L = -np.log(r)
    direct = P3.K_s * r ** -2.0 * ((L + 3 * np.log(L) + 1.7) ** -2.0 - L ** -2.0)
    assert np.allclose(t(r), direct, rtol=1e-9)


def test_first_monotone_step():
    cfg = SolveConfig(P3)
    grid, chain = iterate_chain(cfg, 2)
    assert np.all(chain[0] >= 0) and np.all(chain[1] >= chain[0])
    Z, nonneg = sandwich_constant(P3, grid, chain[0])
    assert nonneg and np.isfinite(Z)


def test_monotone_iteration_diverges_but_stays_ordered(monotone_solve):
    _, rep = monotone_solve
    assert rep.monotone_chain
    assert not rep.converged
    assert all(q > 1 for q in rep.contraction_ratios[:5])


def test_newton_solution(newton_solve, newton_config):
    u, rep = newton_solve
    assert rep.converged
    r = np.geomspace(1e-9, 5e-3, 25)
    assert np.all(u(r) > 0) and np.all(np.diff(u(r)) < 0)
    assert rep.final_residual < 1e-3
    work = work_space(newton_config)
    theta = np.log(u(work.grid) / work.v0_grid)
    out = _solve_newton(newton_config, work, theta)
    assert out[5] and len(out[2]) == 1


def test_refine_error_exponent_on_solution(newton_solve):
    u, _ = newton_solve
    q = refine_error_exponent(u, P3)
    # error relative to K w_{m0} decays at least like (-ln r)^{m0 - 1} times a log
    assert q < P3.m0 - 1 + 0.8


def test_weighted_norm():
    r = np.array([1e-3, 1e-2])
    v = r ** -2.0 * (-np.log(r)) ** -3.0
    assert weighted_norm(P3, r, v) == pytest.approx(1.0)


def test_scaling(newton_solve):
    u, _ = newton_solve
    assert scale_solution(u, P3, 1.0) is u
    with pytest.raises(ValueError):
        scale_solution(u, P3, 0.5)
    l = math.e
    ul = scale_solution(u, P3, l)
    r = np.array([1e-9, 1e-5, 1e-3])
    assert np.allclose(ul(r), l ** -2.0 * u(r / l), rtol=1e-12)
    # the operator commutes with the scaling
    a = fraclap_radial(P3, ul, l * 1e-4).value
    b = l ** -3.0 * fraclap_radial(P3, u, 1e-4).value
    assert a == pytest.approx(b, rel=1e-6)
    # exact identities for the leading ratio and the second-order profile
    rr = 1e-6
    Lr = -math.log(rr)
    assert leading_ratio(ul, P3, l * rr) == pytest.approx(
        leading_ratio(u, P3, rr) * ((Lr - 1) / Lr) ** 2, rel=1e-10)
    g = second_order_profile(ul, P3, l * rr)
    lead = P3.K_s * (l * rr) ** -2 * (Lr - 1) ** -2
    assert g == pytest.approx((ul(l * rr) - lead) * (l * rr) ** 2 * (Lr - 1) ** 3, rel=1e-10)


def test_family(newton_solve, newton_config):
    u, rep = newton_solve
    entries = family_sweep(newton_config, [1.0, math.e, math.e ** 2], u=u)
    ks = [e.k for e in entries]
    assert ks == sorted(ks)
    by_l = {e.l: e.k for e in entries}
    step1 = by_l[math.e] - by_l[1.0]
    step2 = by_l[math.e ** 2] - by_l[math.e]
    # k moves by a fixed amount per unit of ln l
    assert step1 < 0 and step2 == pytest.approx(step1, rel=0.1)
    base = next(e for e in entries if e.l == 1.0)
    assert base.l1_norm == pytest.approx(rep.l1_norm, rel=1e-12)
    assert base.k == pytest.approx(rep.second_order_k, rel=1e-10)


def test_l1_of_constant():
    g = log_grid(1e-12, 1.0, 16)
    one = analytic_field(lambda r: np.ones_like(np.asarray(r, dtype=float)), g,
                         inner_tail=PowerLogTail(0.0, 0.0, 1.0))
    assert l1_norm(P3, one, 0.1) == pytest.approx(4 / 3 * math.pi * 1e-3, rel=1e-8)
    # split at the ball radius: the outer Gauss rule picks up the rest of B_1
    assert l1_unit_ball(one, P3, 1.0, 0.1) == pytest.approx(4 / 3 * math.pi, rel=1e-8)
