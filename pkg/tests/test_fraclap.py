import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serrin.fields import PowerLogTail, analytic_field
from serrin.fraclap import (E2, angular_kernel, expansion_point_v, expansion_point_w,
                            expansion_point_w_tau, expansion_residual_w, fraclap_many,
                            fraclap_radial, make_v_m, make_w_m, make_w_tau_m, power_field,
                            upper_gamma)
from serrin.special_fn import C_s, Params

P3 = Params(3, 0.5)


def gaussian(params, scale=1.0):
    def f(r):
        return np.exp(-(np.asarray(r, dtype=float) / scale) ** 2)

    return analytic_field(f, np.geomspace(1e-6, 10 * scale, 30),
                          inner_tail=PowerLogTail(0.0, 0.0, 1.0), name="gauss")


def gaussian_exact(params, r):
    """(-Delta)^s exp(-|x|^2) = 4^s Gamma(N/2+s)/Gamma(N/2) 1F1(N/2+s; N/2; -r^2)."""
    N, s = params.N, params.s
    return float(4 ** s * mp.gamma(N / 2 + s) / mp.gamma(N / 2) * mp.hyp1f1(N / 2 + s, N / 2, -r * r))


@pytest.mark.parametrize("N,s", [(3, 0.5), (3, 0.75), (4, 0.5), (5, 0.9), (2, 0.3), (1, 0.3)])
def test_gaussian_oracle(N, s):
    p = Params(N, s)
    u = gaussian(p)
    for r in (0.05, 0.5, 1.3, 3.0):
        res = fraclap_radial(p, u, r)
        assert res.value == pytest.approx(gaussian_exact(p, r), rel=1e-6, abs=1e-10)


@pytest.mark.parametrize("N,s", [(3, 0.5), (3, 0.75), (4, 0.5), (5, 0.9)])
def test_powers_and_fundamental_solution(N, s):
    p = Params(N, s)
    for tau in np.linspace(-N + 0.3, 2 * s - 0.2, 7):
        for r in (1e-3, 1.0, 50.0):
            res = fraclap_radial(p, power_field(p, tau), r)
            exact = float(C_s(p, tau)) * r ** (tau - 2 * s)
            assert res.value == pytest.approx(exact, rel=1e-5, abs=1e-9 * abs(r ** (tau - 2 * s)))
    for r in (0.5, 1.0, 2.0):
        assert abs(fraclap_radial(p, power_field(p, p.tau_fund), r).value) < 1e-6


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(0.2, 5.0), r=st.floats(0.1, 3.0))
def test_scaling_covariance(lam, r):
    u = gaussian(P3)
    ul = gaussian(P3, scale=lam)
    a = fraclap_radial(P3, ul, lam * r).value
    b = lam ** (-2 * P3.s) * fraclap_radial(P3, u, r).value
    assert a == pytest.approx(b, rel=1e-6, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(r=st.floats(0.01, 10), rho=st.floats(0.01, 10), N=st.integers(1, 5))
def test_angular_kernel_homogeneity(r, rho, N):
    if abs(r - rho) < 1e-3 * r:
        return
    p = Params(N, 0.4)
    k1 = angular_kernel(p, r, rho)
    k2 = angular_kernel(p, 2 * r, 2 * rho)
    assert k2 / k1 == pytest.approx(2.0 ** (-(N + 2 * p.s)), rel=1e-10)
    assert angular_kernel(p, rho, r) == pytest.approx(k1, rel=1e-10)


def test_profiles():
    w = make_w_m(P3, P3.m0)
    r = np.array([1e-8, 1e-3, 0.1])
    assert np.allclose(w(r), r ** -2.0 * (-np.log(r)) ** -2.0, rtol=1e-14)
    assert w(1.0) == 0.0 and w(2.0) == 0.0
    v = make_v_m(P3, 1.0)
    assert v(1e-5) == pytest.approx(-np.log(1e-5))
    band = np.linspace(E2, 0.999, 50)
    assert np.all(np.isfinite(v(band)))
    with pytest.raises(ValueError):
        make_w_tau_m(P3, 1.5, 1.0)


def test_upper_gamma():
    from scipy import special
    for a, z in ((0.5, 0.3), (2.0, 5.0), (3.5, 40.0)):
        assert upper_gamma(a, z) == pytest.approx(special.gammaincc(a, z) * special.gamma(a), rel=1e-12)
    for a, z in ((-0.5, 2.0), (-2.3, 30.0)):
        assert upper_gamma(a, z) == pytest.approx(float(mp.gammainc(a, z)), rel=1e-10)


def test_expansion_w_scaled_residual_bounded():
    rs = np.geomspace(1e-10, 1e-4, 13)
    scaled = [expansion_residual_w(P3, P3.m0, r)[1] for r in rs]
    assert max(abs(x) for x in scaled) < 2 * min(abs(x) for x in scaled)


def test_expansion_terms_are_needed():
    """Dropping the second term leaves a scaled residual growing like D (-ln r)."""
    a = expansion_point_w(P3, P3.m0, 1e-10, terms=(True, False)).scaled
    b = expansion_point_w(P3, P3.m0, 1e-4, terms=(True, False)).scaled
    slope = (a - b) / (math.log(1e10) - math.log(1e4))
    assert slope == pytest.approx(-3 * math.pi, rel=0.1)
    full = expansion_point_w(P3, P3.m0, 1e-10).scaled
    assert abs(full) < 0.2 * abs(a)


def test_expansion_v_and_w_tau():
    for r in (1e-9, 1e-6):
        v = expansion_point_v(P3, 1.0, r)
        assert v.lead_ratio == pytest.approx(1.0, abs=1e-5)
        w = expansion_point_w_tau(P3, -1.0, 1.0, r)
        assert w.lead_ratio == pytest.approx(1.0, abs=1e-9)
        assert abs(w.scaled) < 1e-8
    with pytest.raises(ValueError):
        expansion_point_w(P3, P3.m0, 0.5)


def test_errors():
    with pytest.raises(ValueError):
        fraclap_radial(P3, gaussian(P3), 0.0)
    bad = analytic_field(lambda r: np.asarray(r) ** -3.5, np.geomspace(1e-3, 1, 5),
                         inner_tail=PowerLogTail(-3.5, 0, 1.0))
    with pytest.raises(ValueError):
        fraclap_radial(P3, bad, 0.1)


def test_many_matches_single():
    u = gaussian(P3)
    vals, errs, conv = fraclap_many(P3, u, [0.2, 0.7])
    assert vals[1] == fraclap_radial(P3, u, 0.7).value
    assert np.all(conv) and np.all(errs >= 0)
