"""Radial fractional Laplacian in log-radius form, plus the cutoff log profiles.

Writing rho = r e^x, the angular average of |r e1 - rho w|^{-2mu} equals
(r rho)^{-mu} h_mu(x), where

    h_mu(x) = |S^{N-2}| int_0^pi (2 cosh x - 2 cos th)^{-mu} sin^{N-2} th d th

is even in x. For a radial u this gives

    (-Delta)^s u(r) = C_{N,s} r^{-2s} PV int (u(r) - u(r e^x)) e^{alpha x} h_nu(x) dx

with nu = (N+2s)/2 and alpha = (N-2s)/2. Near x = 0, h_nu ~ c |x|^{-1-2s}; the
window |x| < delta is folded onto [0, delta] (second difference) and
integrated with a Gauss-Jacobi rule carrying the x^{1-2s} weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .fields import OuterTail, PowerLogTail, RadialField, analytic_field
from .quadrature import QuadratureSpec, adaptive_panels, gauss_jacobi, gauss_legendre
from .special_fn import C_s, Params, coeffs, frac_normalization, sphere_area

E2 = math.exp(-2.0)


class QuadratureError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# log-radius kernel

def _log_tanh(y):
    """ln tanh(y) for y > 0, accurate at both ends."""
    e = np.exp(-2 * y)
    return np.log(-np.expm1(-2 * y)) - np.log1p(e)


def _h_closed_n1(x, mu):
    return (2 * np.sinh(x / 2)) ** (-2 * mu) + (2 * np.cosh(x / 2)) ** (-2 * mu)


def _h_closed_n3(x, mu):
    lq = 2 * _log_tanh(x / 2)  # ln[(A-2)/(A+2)], A = 2 cosh x
    if abs(mu - 1) < 1e-12:
        return -math.pi * lq
    big = (2 * np.cosh(x / 2)) ** (2 - 2 * mu)  # (A+2)^{1-mu}
    return math.pi / (mu - 1) * big * np.expm1((1 - mu) * lq)


def _h_quadrature(x, N, mu, width=0.75, order=16):
    """Theta integral with theta = a sinh(v) on [0, pi/2] (a = 2 sinh(x/2)),
    which resolves the peak of width ~x at theta = 0, and plain GL on [pi/2, pi]."""
    out = np.empty_like(x)
    a = 2 * np.sinh(x / 2)
    vmax = np.arcsinh(np.pi / 2 / a)
    npan = np.clip(np.ceil(vmax / width), 1, 64).astype(int)
    t, w = gauss_legendre(order)
    for k in np.unique(npan):
        sel = npan == k
        ak = a[sel][:, None]
        vk = vmax[sel][:, None]
        acc = np.zeros(int(sel.sum()))
        for j in range(k):
            lo, hi = vk * j / k, vk * (j + 1) / k
            v = (lo + hi) / 2 + (hi - lo) / 2 * t
            th = ak * np.sinh(v)
            f = (ak ** 2 + 4 * np.sin(th / 2) ** 2) ** (-mu) * ak * np.cosh(v)
            if N != 2:
                f = f * np.sin(th) ** (N - 2)
            acc += ((hi - lo) / 2 * f) @ w
        out[sel] = acc
    t2, w2 = gauss_legendre(2 * order)
    th = 3 * np.pi / 4 + np.pi / 4 * t2
    f = (a[:, None] ** 2 + 4 * np.sin(th / 2) ** 2) ** (-mu)
    if N != 2:
        f = f * np.sin(th) ** (N - 2)
    out += np.pi / 4 * (f @ w2)
    return sphere_area(N - 1) * out


def log_kernel(N: int, mu: float, x):
    """h_mu(x) for x != 0 (even in x)."""
    x = np.abs(np.asarray(x, dtype=float))
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x == 0):
        raise QuadratureError("log kernel is singular at x = 0")
    if N == 1:
        out = _h_closed_n1(x, mu)
    elif N == 3:
        out = _h_closed_n3(x, mu)
    else:
        out = _h_quadrature(x, N, mu)
    return float(out[0]) if scalar else out


def log_kernel_scaled(params: Params, x):
    """|x|^{1+2s} h_nu(x): smooth and positive, finite at x = 0."""
    x = np.abs(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    z = x == 0
    nu = (params.N + 2 * params.s) / 2
    if np.any(~z):
        out[~z] = x[~z] ** (1 + 2 * params.s) * log_kernel(params.N, nu, x[~z])
    if np.any(z):
        out[z] = kernel_singular_coeff(params)
    return out


def kernel_singular_coeff(params: Params) -> float:
    """c0 in h_nu(x) ~ c0 |x|^{-1-2s} as x -> 0."""
    N, s = params.N, params.s
    if N == 1:
        return 1.0
    # |S^{N-2}| int_0^inf (1 + t^2)^{-nu} t^{N-2} dt
    nu = (N + 2 * s) / 2
    return sphere_area(N - 1) * 0.5 * math.exp(
        math.lgamma((N - 1) / 2) + math.lgamma(nu - (N - 1) / 2) - math.lgamma(nu))


def angular_kernel(params: Params, r, rho):
    """int_{S^{N-1}} |r e1 - rho w|^{-(N+2s)} d sigma(w)."""
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if np.any(r <= 0) or np.any(rho <= 0):
        raise ValueError("radii must be positive")
    if np.any(r == rho):
        raise QuadratureError("angular kernel is singular at rho = r; use the PV path")
    nu = (params.N + 2 * params.s) / 2
    x = np.log(rho / r)
    out = (r * rho) ** (-nu) * log_kernel(params.N, nu, x)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# operator

@dataclass(frozen=True)
class FracLapResult:
    value: float
    error: float
    converged: bool

    def __float__(self):
        return self.value


def _near_field(params, f, f0, delta, n):
    """Folded PV window [0, delta].

    h_nu = c0 (2 sinh(x/2))^{-1-2s} + rest, where the first piece is exactly
    x^{-1-2s} times a smooth factor (Gauss-Jacobi with the x^{1-2s} weight after
    dividing the second difference by x^2) and the rest is O(x^{1-2s}) + O(1),
    which times the O(x^2) bracket is left to Gauss-Legendre.
    """
    N, s, alpha = params.N, params.s, params.alpha
    nu = (N + 2 * s) / 2
    c0 = kernel_singular_coeff(params)

    def bracket(x):
        return 2 * np.cosh(alpha * x) * f0 - np.exp(alpha * x) * f(x) - np.exp(-alpha * x) * f(-x)

    t, w = gauss_jacobi(n, 0.0, 1.0 - 2 * s)
    x = delta * (1 + t) / 2
    sing = c0 * (np.sinh(x / 2) / (x / 2)) ** (-1 - 2 * s)
    part1 = (delta / 2) ** (2 - 2 * s) * float(np.dot(w, bracket(x) / x ** 2 * sing))
    t, w = gauss_legendre(n)
    x = delta * (1 + t) / 2
    rest = log_kernel(N, nu, x) - c0 * (2 * np.sinh(x / 2)) ** (-1 - 2 * s)
    part2 = delta / 2 * float(np.dot(w, bracket(x) * rest))
    return part1 + part2


def _near_field_noise(params, f0, delta, n):
    """Rounding floor of the folded second difference, ~eps |f0| / x^2 per node."""
    s = params.s
    t, w = gauss_jacobi(n, 0.0, 1.0 - 2 * s)
    x = delta * (1 + t) / 2
    c0 = kernel_singular_coeff(params)
    eps = np.finfo(float).eps
    return (delta / 2) ** (2 - 2 * s) * 8 * eps * abs(f0) * c0 * float(np.sum(w / x ** 2))


def _far_edges(lo, hi, inner, extra):
    """Panel edges on [lo, hi] (0 < lo < hi): geometric plus aligned breakpoints."""
    n = max(4, int(math.ceil(3 * math.log(hi / lo))))
    e = [np.geomspace(lo, hi, n + 1)]
    e.append(np.arange(math.ceil(inner), hi, 2.0))
    pts = [p for p in extra if lo < p < hi]
    e.append(np.asarray(pts, dtype=float))
    edges = np.unique(np.concatenate(e))
    # drop slivers that would only cost evaluations
    keep = np.concatenate([[True], np.diff(edges) > 1e-9 * np.maximum(1.0, edges[1:])])
    return edges[keep]


def _breaks_in_x(u: RadialField, r):
    pts = list(u.breakpoints)
    if u.exact is None:
        pts += [u.r_min, u.r_max]
        # spline knots only matter where the field is sampled densely
        pts += list(u.grid)
    sup = u.support
    if np.isfinite(sup):
        pts.append(sup)
    pts = np.asarray([p for p in pts if p > 0 and p != r], dtype=float)
    return np.log(pts / r)


def upper_gamma(a: float, z: float) -> float:
    """Upper incomplete Gamma(a, z) for real a and z > 0 (recurrence for a <= 0)."""
    if a > 0:
        return float(special.gammaincc(a, z) * special.gamma(a))
    k = int(math.floor(-a)) + 1 if a != int(a) else int(-a)
    a0 = a + k
    g = float(special.exp1(z)) if a0 == 0 else float(special.gammaincc(a0, z) * special.gamma(a0))
    for j in range(k):
        aj = a0 - 1 - j
        g = (g - z ** aj * math.exp(-z)) / aj
    return g


def _inner_tail_integral(tail: PowerLogTail, r, x_lo, N):
    """int_{-inf}^{x_lo} a (r e^x)^tau (-ln(r e^x))^m e^{N x} dx."""
    beta = N + tail.tau
    L0 = -math.log(r)
    Y = L0 - x_lo
    if tail.coeff == 0:
        return 0.0
    if tail.m == 0:
        return tail.coeff * r ** tail.tau * math.exp(beta * x_lo) / beta
    if Y <= 0:
        raise ValueError("inner tail log factor needs radii below 1")
    z = beta * Y
    # e^{beta L0} beta^{-m-1} Gamma(m+1, beta Y), with e^{beta L0 - z} = e^{beta x_lo}
    g = upper_gamma(tail.m + 1, z) * math.exp(z)
    return tail.coeff * r ** tail.tau * math.exp(beta * x_lo) * beta ** (-tail.m - 1) * g


def fraclap_radial(params: Params, u: RadialField, r: float,
                   quad: QuadratureSpec | None = None, strict: bool = False) -> FracLapResult:
    """(-Delta)^s u at radius r for a radial field u, with an error estimate."""
    quad = quad or QuadratureSpec()
    N, s, alpha = params.N, params.s, params.alpha
    nu = (N + 2 * s) / 2
    r = float(r)
    if r <= 0:
        raise ValueError("r must be positive")
    if u.exact is None and not (u.r_min <= r <= u.r_max):
        raise ValueError("evaluation radius outside the field's grid")
    tin = u.inner_tail
    if tin is None:
        raise ValueError("field needs an inner tail model")
    if tin.tau <= -N:
        raise ValueError("inner tail not integrable against the kernel (tau_in <= -N)")
    ot = u.outer_tail
    f0 = float(u(r))

    def f(x):
        return u(r * np.exp(x))

    xb = _breaks_in_x(u, r)
    # near-field window, kept clear of breakpoints when possible
    delta = quad.near_field_width
    if len(xb):
        nearest = float(np.min(np.abs(xb)))
        if nearest < delta:
            delta = max(nearest, delta / 16)
    n = quad.near_field_order
    # the folded integrand is analytic on the window, so low orders converge
    # spectrally while rounding grows like n^{4s}; compare n with n + 4
    near_a = _near_field(params, f, f0, delta, n)
    near_b = _near_field(params, f, f0, delta, n + 4)
    near_err = abs(near_b - near_a) + _near_field_noise(params, f0, delta, n + 4)

    def integrand(x):
        return (f0 - f(x)) * np.exp(alpha * x) * log_kernel(N, nu, x)

    # Past |x| = X the kernel is |S^{N-1}| e^{-nu|x|} to relative O(e^{-2X}),
    # so the tails beyond the truncation points are integrated in closed form.
    cut = 25.0 * quad.far_cutoff_multiplier
    x_hi = cut
    if np.isfinite(u.support):
        x_hi += max(0.0, math.log(u.support / r))
    if u.exact is None:
        x_hi = max(x_hi, math.log(u.r_max / r) + cut)
    x_lo = -cut
    if u.exact is None:
        x_lo = min(x_lo, math.log(u.r_min / r) - cut)
    if ot.kind == "power" and ot.tau >= 2 * s:
        raise ValueError("outer tail grows too fast for the kernel")

    pos = adaptive_panels(integrand, _far_edges(delta, x_hi, 1.0, xb[xb > 0]),
                          rel_tol=quad.rel_tol, abs_tol=quad.abs_tol / 4,
                          max_rounds=min(quad.max_subdivisions, 14))
    negx = -xb[xb < 0]
    neg = adaptive_panels(lambda y: integrand(-y), _far_edges(delta, -x_lo, 1.0, negx),
                          rel_tol=quad.rel_tol, abs_tol=quad.abs_tol / 4,
                          max_rounds=min(quad.max_subdivisions, 14))

    S = sphere_area(N)
    rem = f0 * S * math.exp(-2 * s * x_hi) / (2 * s) + f0 * S * math.exp(N * x_lo) / N
    if ot.kind == "power":
        rem -= ot.coeff * S * r ** ot.tau * math.exp((ot.tau - 2 * s) * x_hi) / (2 * s - ot.tau)
    rem -= S * _inner_tail_integral(tin, r, x_lo, N)

    total = near_b + pos.value + neg.value + rem
    err = near_err + pos.error + neg.error + 1e-12 * abs(rem)
    cn = frac_normalization(params) * r ** (-2 * s)
    scale = max(abs(near_b) + abs(pos.value) + abs(neg.value), abs(total))
    converged = (pos.converged and neg.converged
                 and err <= max(quad.abs_tol / cn, 10 * quad.rel_tol * scale))
    if strict and not converged:
        raise QuadratureError(f"fraclap_radial did not converge at r={r}: err={cn * err:.3e}")
    return FracLapResult(cn * total, cn * err, bool(converged))


def fraclap_many(params, u, radii, quad=None):
    res = [fraclap_radial(params, u, float(r), quad) for r in np.atleast_1d(radii)]
    return (np.array([x.value for x in res]), np.array([x.error for x in res]),
            np.array([x.converged for x in res]))


# ---------------------------------------------------------------------------
# cutoff log profiles

def _blend_coeffs(m):
    """Quintic Hermite in y = ln r on [-2, 0]: matches (-y)^m up to second
    derivatives at y = -2 and vanishes to second order at y = 0."""
    f0 = 2.0 ** m
    f1 = -m * 2.0 ** (m - 1)
    f2 = m * (m - 1) * 2.0 ** (m - 2)
    # t = (y + 2)/2, so d/dt = 2 d/dy
    return f0, 2 * f1, 4 * f2


def _blend(y, m):
    f0, d1, d2 = _blend_coeffs(m)
    t = (y + 2) / 2
    u = 1 - t
    # quintic Hermite basis functions at the left end (right end data all zero)
    H0 = u ** 3 * (1 + 3 * t + 6 * t ** 2)
    H1 = u ** 3 * t * (1 + 3 * t)
    H2 = u ** 3 * t ** 2 / 2
    return f0 * H0 + d1 * H1 + d2 * H2


def v_profile(m):
    """Exact vectorized v_m."""
    m = float(m)

    def v(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        y = np.log(np.where(r > 0, r, 1.0))
        core = r < E2
        out[core] = (-y[core]) ** m
        band = (r >= E2) & (r < 1)
        out[band] = _blend(y[band], m)
        return out

    return v


def _profile_grid():
    return np.geomspace(1e-14, 1.0, 281)


def make_v_m(params: Params, m: float) -> RadialField:
    v = v_profile(m)
    return analytic_field(v, _profile_grid()[:-1], inner_tail=PowerLogTail(0.0, float(m), 1.0),
                          outer_tail=OuterTail("zero", support=1.0),
                          breakpoints=(E2, 1.0), name=f"v_{m:g}")


def make_w_tau_m(params: Params, tau: float, m: float) -> RadialField:
    if not (-params.N < tau < 2 * params.s):
        raise ValueError("tau must lie in (-N, 2s)")
    v = v_profile(m)
    tau = float(tau)

    def w(r):
        r = np.asarray(r, dtype=float)
        return r ** tau * v(r)

    return analytic_field(w, _profile_grid()[:-1], inner_tail=PowerLogTail(tau, float(m), 1.0),
                          outer_tail=OuterTail("zero", support=1.0),
                          breakpoints=(E2, 1.0), name=f"w_{tau:g},{m:g}")


def make_w_m(params: Params, m: float) -> RadialField:
    return make_w_tau_m(params, params.tau_fund, m)


def power_field(params: Params, tau: float, coeff: float = 1.0) -> RadialField:
    """Global power coeff * |x|^tau."""
    tau = float(tau)

    def p(r):
        return coeff * np.asarray(r, dtype=float) ** tau

    return analytic_field(p, np.geomspace(1e-6, 1e6, 25),
                          inner_tail=PowerLogTail(tau, 0.0, coeff),
                          outer_tail=OuterTail("power", coeff=coeff, tau=tau), name=f"r^{tau:g}")


# ---------------------------------------------------------------------------
# expansion residuals

@dataclass(frozen=True)
class ExpansionPoint:
    r: float
    value: float
    error: float
    predicted: float
    residual: float
    scaled: float
    lead_ratio: float
    converged: bool


def _check_small_r(r):
    if not (0 < r < E2):
        raise ValueError("expansion residuals need 0 < r < e^-2")


def expansion_point_w(params, m, r, quad=None, terms=(True, True)) -> ExpansionPoint:
    _check_small_r(r)
    if m == 0:
        raise ValueError("m must be nonzero")
    c = coeffs(params, 0.0, m)
    L = -math.log(r)
    res = fraclap_radial(params, make_w_m(params, m), r, quad)
    lead = c.B_m * r ** -params.N * L ** (m - 1)
    pred = (lead if terms[0] else 0.0) + (c.D_m * r ** -params.N * L ** (m - 2) if terms[1] else 0.0)
    resid = res.value - pred
    return ExpansionPoint(r, res.value, res.error, pred, resid, resid * r ** params.N * L ** (3 - m),
                          res.value * r ** params.N * L ** (1 - m) / c.B_m, res.converged)


def expansion_point_v(params, m, r, quad=None) -> ExpansionPoint:
    _check_small_r(r)
    c = coeffs(params, 0.0, m)
    L = -math.log(r)
    res = fraclap_radial(params, make_v_m(params, m), r, quad)
    r2s = r ** (-2 * params.s)
    pred = -c.B_m * r2s * L ** (m - 1) + c.D_m * r2s * L ** (m - 2)
    resid = res.value - pred
    lead = -c.B_m * r2s * L ** (m - 1)
    return ExpansionPoint(r, res.value, res.error, pred, resid,
                          resid * r ** (2 * params.s) * L ** (3 - m),
                          res.value / lead if lead != 0 else math.nan, res.converged)


def expansion_point_w_tau(params, tau, m, r, quad=None) -> ExpansionPoint:
    """First-order symbol expansion r^{tau-2s}[C_s(tau) L^m - C_s'(tau) m L^{m-1}]."""
    _check_small_r(r)
    c = coeffs(params, tau, m)
    L = -math.log(r)
    res = fraclap_radial(params, make_w_tau_m(params, tau, m), r, quad)
    base = r ** (tau - 2 * params.s)
    Ct = float(C_s(params, tau))
    pred = Ct * base * L ** m - c.B_tau_m * base * L ** (m - 1)
    resid = res.value - pred
    lead = Ct * base * L ** m
    return ExpansionPoint(r, res.value, res.error, pred, resid,
                          resid * r ** (2 * params.s - tau) * L ** (2 - m),
                          res.value / lead if lead != 0 else math.nan, res.converged)


def expansion_residual_w(params, m, r, quad=None):
    p = expansion_point_w(params, m, r, quad)
    return p.residual, p.scaled


def expansion_residual_v(params, m, r, quad=None):
    p = expansion_point_v(params, m, r, quad)
    return p.residual, p.scaled


def expansion_residual_w_tau(params, tau, m, r, quad=None):
    p = expansion_point_w_tau(params, tau, m, r, quad)
    return p.residual, p.scaled
