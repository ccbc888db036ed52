import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from serrin.fields import OuterTail, PowerLogTail, RadialField, analytic_field, log_grid


def test_power_log_tail():
    t = PowerLogTail(-2.0, -2.0, 3.0)
    r = 1e-5
    assert t(r) == pytest.approx(3.0 * r ** -2 * (-np.log(r)) ** -2)


def test_validation():
    g = log_grid(1e-3, 1.0, 5)
    with pytest.raises(ValueError):
        RadialField(grid=g[::-1], values=np.ones(5))
    with pytest.raises(ValueError):
        RadialField(grid=g, values=np.ones(4))
    with pytest.raises(ValueError):
        RadialField(grid=g, values=-np.ones(5), interp="log")
    with pytest.raises(ValueError):
        RadialField(grid=g, values=np.ones(5), weight=(0.0, 1.0))
    with pytest.raises(ValueError):
        OuterTail(kind="other")


def test_values_are_reproduced_at_nodes_and_tails():
    g = log_grid(1e-6, 0.5, 40)
    f = lambda r: r ** -1.5 * (1 + r)
    u = RadialField(grid=g, values=f(g), interp="log", inner_tail=PowerLogTail(-1.5, 0, 1.0),
                    outer_tail=OuterTail("power", coeff=1.0, tau=-0.5))
    assert np.allclose(u(g), f(g), rtol=1e-13)
    assert u(1e-9) == pytest.approx(1e-9 ** -1.5)
    assert u(4.0) == pytest.approx(4.0 ** -0.5)
    assert isinstance(u(0.1), float)


def test_spline_accuracy_in_log_radius():
    g = log_grid(1e-8, 0.5, 120)
    f = lambda r: r ** -2 * (-np.log(r)) ** -2
    u = RadialField(grid=g, values=f(g), interp="log")
    r = np.geomspace(2e-8, 0.1, 57)
    assert np.max(np.abs(u(r) / f(r) - 1)) < 1e-5


def test_weight_removes_singular_scale():
    g = log_grid(1e-10, 0.5, 30)
    f = lambda r: r ** -2 * (-np.log(r)) ** -3 * (1 + 0.1 * r)
    u = RadialField(grid=g, values=f(g), weight=(-2.0, -3.0))
    plain = RadialField(grid=g, values=f(g))
    r = np.geomspace(2e-10, 0.1, 41)
    err = np.max(np.abs(u(r) / f(r) - 1))
    assert err < 1e-4
    assert err < 1e-2 * np.max(np.abs(plain(r) / f(r) - 1))


def test_edge_weight_resolves_boundary_layer():
    S = 1.0
    g = np.concatenate([log_grid(1e-6, 0.5, 40)[:-1], 1 - np.geomspace(0.5, 1e-3, 20)])
    f = lambda r: (1 - r * r) ** 0.5 * (2 + r)
    u = RadialField(grid=g, values=f(g), outer_tail=OuterTail("zero", support=S, edge_exponent=0.5))
    r = np.array([0.9995, 0.99999])
    assert np.allclose(u(r), f(r), rtol=2e-3)
    assert u(1.5) == 0.0


def test_with_values_and_analytic_field():
    g = log_grid(1e-3, 1.0, 10)
    a = analytic_field(lambda r: 2 * r, g)
    assert a(0.37) == pytest.approx(0.74)
    b = a.with_values(3 * g)
    assert b.exact is None and b(g[3]) == pytest.approx(3 * g[3])


@settings(max_examples=30, deadline=None)
@given(tau=st.floats(-3, 1), c=st.floats(0.1, 10))
def test_pure_powers_interpolate_exactly_in_log_mode(tau, c):
    g = log_grid(1e-6, 10.0, 12)
    u = RadialField(grid=g, values=c * g ** tau, interp="log")
    r = np.geomspace(1.1e-6, 9.0, 23)
    assert np.allclose(u(r), c * r ** tau, rtol=1e-10)
