import math
from types import SimpleNamespace

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serrin.quadrature import QuadratureSpec
from serrin.special_fn import (C_s, C_s_max, C_s_prime, C_s_prime0, C_s_second0, DomainError,
                               K_s, Params, c_s0_constant, coeffs, digamma, frac_normalization,
                               log_gamma, log_shift_coeff, sphere_area)

PARAMS = [Params(3, 0.5), Params(3, 0.75), Params(4, 0.5), Params(5, 0.9), Params(1, 0.3),
          Params(2, 0.2)]


mp.mp.dps = 40


def mp_C(N, s, tau):
    return 2 ** (2 * mp.mpf(s)) * mp.gamma((N + tau) / 2) * mp.gamma((2 * s - tau) / 2) / (
        mp.gamma(-mp.mpf(tau) / 2) * mp.gamma((N - 2 * s + tau) / 2))


def test_params_derived_quantities():
    p = Params(3, 0.5)
    assert p.p_star == 1.5
    assert p.m0 == -2.0
    assert p.tau_fund == -2.0
    assert p.K_s == pytest.approx(math.pi ** 2, rel=1e-14)


@pytest.mark.parametrize("N,s", [(0, 0.5), (3, 0.0), (3, 1.0), (1, 0.5), (1, 0.7), (2.5, 0.5)])
def test_params_rejects_invalid(N, s):
    with pytest.raises(DomainError):
        Params(N, s)


@pytest.mark.parametrize("p", PARAMS, ids=lambda p: f"N{p.N}s{p.s}")
def test_C_s_against_mpmath(p):
    for tau in np.linspace(-p.N + 0.1, 2 * p.s - 0.1, 17):
        if abs(tau) < 1e-9 or abs(tau - p.tau_fund) < 1e-9:
            continue
        assert float(C_s(p, tau)) == pytest.approx(float(mp_C(p.N, p.s, tau)), rel=1e-12, abs=1e-15)


def test_closed_form_values_n3_half():
    p = Params(3, 0.5)
    assert C_s_prime0(p) == pytest.approx(-math.pi / 2, rel=1e-14)
    assert C_s_second0(p) == pytest.approx(-math.pi, rel=1e-12)
    assert log_shift_coeff(p) == pytest.approx(3.0, rel=1e-12)
    c = coeffs(p, 0.0, p.m0)
    assert c.B_m == pytest.approx(math.pi, rel=1e-14)
    assert c.D_m == pytest.approx(-3 * math.pi, rel=1e-12)


def test_second_derivative_against_finite_differences():
    for p in PARAMS:
        h = 1e-4
        fd = (float(C_s(p, h)) - 2 * float(C_s(p, 0.0)) + float(C_s(p, -h))) / h ** 2
        assert C_s_second0(p) == pytest.approx(fd, rel=1e-5)


def test_derivative_against_mpmath():
    for p in PARAMS:
        d = mp.diff(lambda t: mp_C(p.N, p.s, t), mp.mpf("-0.37"))
        assert float(C_s_prime(p, -0.37)) == pytest.approx(float(d), rel=1e-10)


def test_frac_normalization_examples():
    # N = 2s is outside Params but the normalization itself is defined there
    assert frac_normalization(SimpleNamespace(N=1, s=0.5)) == pytest.approx(1 / math.pi, rel=1e-14)
    assert frac_normalization(Params(3, 0.5)) == pytest.approx(math.pi ** -2, rel=1e-14)


def test_K_s_limit_s_to_one():
    for N in (3, 4, 5):
        k1 = ((N - 2) ** 2 / 2) ** ((N - 2) / 2)
        assert K_s(Params(N, 0.9999)) == pytest.approx(k1, rel=2e-3)


def test_sphere_area():
    assert sphere_area(1) == 2.0
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


def test_gamma_helpers():
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi))
    assert digamma(1.0) == pytest.approx(-0.5772156649015329)
    with pytest.raises(DomainError):
        log_gamma(-1.0)


def test_tau_outside_domain():
    p = Params(3, 0.5)
    with pytest.raises(DomainError):
        C_s(p, -3.0)
    with pytest.raises(DomainError):
        C_s(p, 1.0)


@settings(max_examples=60, deadline=None)
@given(N=st.integers(1, 6), s=st.floats(0.05, 0.95), u=st.floats(0.001, 0.999))
def test_symmetry_and_maximum(N, s, u):
    if N <= 2 * s:
        return
    p = Params(N, s)
    tau = -N + u * (N + 2 * s)
    a, b = float(C_s(p, tau)), float(C_s(p, 2 * s - N - tau))
    assert abs(a - b) <= 1e-12 * max(1.0, abs(a))
    assert a <= C_s_max(p) * (1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 6), s=st.floats(0.05, 0.95))
def test_zeros_and_signs(N, s):
    if N <= 2 * s:
        return
    p = Params(N, s)
    assert float(C_s(p, 0.0)) == 0.0
    assert float(C_s(p, 2 * s - N)) == 0.0
    assert C_s_prime0(p) < 0
    assert float(C_s(p, p.tau_fund / 2)) > 0
    assert p.K_s > 0


@pytest.mark.parametrize("p", PARAMS[:4], ids=lambda p: f"N{p.N}s{p.s}")
def test_c_s0_positive_and_stable(p):
    a = c_s0_constant(p)
    b = c_s0_constant(p, QuadratureSpec(rel_tol=5e-9))
    assert a.value > 0 and a.converged
    assert abs(a.value - b.value) <= max(a.error, 1e-12 * a.value) * 10
