import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serrin.asymptotics import (AsymptoticsError, AsymptoticsWindow, barrier_checks,
                                harnack_ratio, leading_limit, leading_ratio, second_order_coeff)
from serrin.checks import synthetic_field
from serrin.fields import analytic_field, log_grid
from serrin.special_fn import Params

P3 = Params(3, 0.5)
WIN = AsymptoticsWindow(1e-12, 1e-4)


def test_window_validation():
    with pytest.raises(AsymptoticsError):
        AsymptoticsWindow(1e-4, 1e-3)
    with pytest.raises(AsymptoticsError):
        AsymptoticsWindow(1e-8, 0.5)
    with pytest.raises(AsymptoticsError):
        AsymptoticsWindow(1e-8, 1e-3, per_decade=4)
    r = WIN.radii()
    assert r[0] == pytest.approx(1e-12) and r[-1] == pytest.approx(1e-4) and len(r) >= 65
    d = AsymptoticsWindow.default(1e-2)
    assert d.r_lo == pytest.approx(1e-13) and d.r_hi == pytest.approx(1e-5)


def test_leading_ratio_examples():
    u = synthetic_field(P3, lambda r: 0.0 * r)
    assert leading_ratio(u, P3, 1e-6) == pytest.approx(P3.K_s, rel=1e-13)
    with pytest.raises(AsymptoticsError):
        leading_ratio(u, P3, 0.5)
    # u = K w_{m0} (1 + 2/L) extrapolates back to K
    v = synthetic_field(P3, lambda r: 2 * P3.K_s * r ** -2.0 * (-np.log(r)) ** -3.0)
    assert leading_limit(v, P3, WIN) == pytest.approx(P3.K_s, rel=1e-10)


def test_second_order_planted():
    u = synthetic_field(P3, lambda r: 2.5 * r ** -2.0 * (-np.log(r)) ** -3.0)
    k, q = second_order_coeff(u, P3, WIN)
    assert k == pytest.approx(2.5, rel=1e-10) and q < 1e-10


def test_second_order_rejects_poor_fit():
    u = synthetic_field(P3, lambda r: r ** -2.0 * (-np.log(r)) ** -3.0 * np.sin(np.log(-np.log(r)) * 20))
    with pytest.raises(AsymptoticsError):
        second_order_coeff(u, P3, WIN)
    k, q = second_order_coeff(u, P3, WIN, raise_on_poor=False)
    assert q > 0.05 * abs(k)


@settings(max_examples=25, deadline=None)
@given(k0=st.floats(-20, 20), c=st.floats(-50, 50))
def test_second_order_ignores_lower_order_terms(k0, c):
    u = synthetic_field(P3, lambda r: r ** -2.0 * (-np.log(r)) ** -3.0 * (k0 + c / -np.log(r)))
    k, _ = second_order_coeff(u, P3, WIN, raise_on_poor=False)
    assert k == pytest.approx(k0, abs=1e-8 * (1 + abs(c)))


def test_harnack():
    g = log_grid(1e-6, 1.0, 20)
    u = analytic_field(lambda r: np.asarray(r) ** -2.0, g)
    assert harnack_ratio(u, 0.01) == pytest.approx(4.0)
    one = analytic_field(lambda r: np.ones_like(np.asarray(r)), g)
    assert harnack_ratio(one, 0.1) == 1.0
    neg = analytic_field(lambda r: np.asarray(r) - 0.05, g)
    with pytest.raises(AsymptoticsError):
        harnack_ratio(neg, 0.01)


def test_barrier_on_model_profile():
    u = synthetic_field(P3, lambda r: 0.0 * r)
    rep = barrier_checks(u, P3, WIN)
    assert rep.passed and rep.upper_ok
    assert rep.taus == pytest.approx((-0.5, -1.0, -1.5))
    assert rep.upper_sup == pytest.approx(P3.K_s / math.log(1e4) ** 2)
