"""Green function of (-Delta)^s on a ball with zero exterior data, and radial solves.

Kernel (Blumenthal-Getoor-Ray form):

    G(x, y) = kappa |x-y|^{2s-N} int_0^{rho0} t^{s-1} (1+t)^{-N/2} dt,
    rho0 = (R^2-|x|^2)(R^2-|y|^2) / (R^2 |x-y|^2),

and the integral equals B(s, N/2-s) I_v(s, N/2-s) with v = rho0/(1+rho0), so G is
evaluated without cancellation. For radial data the angular average splits as
G_bar = Phi_bar - H_bar: the Riesz part Phi_bar depends on ln(rho/r) alone and
carries the diagonal singularity, while the regular part H_bar is smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special

from .fields import OuterTail, PowerLogTail, RadialField
from .fraclap import log_kernel
from .quadrature import QuadratureSpec, gauss_legendre
from .special_fn import Params, sphere_area


def green_kappa(params: Params) -> float:
    N, s = params.N, params.s
    return math.exp(math.lgamma(N / 2) - 2 * s * math.log(2) - (N / 2) * math.log(math.pi)
                    - 2 * math.lgamma(s))


def riesz_constant(params: Params) -> float:
    """a_{N,s} with (-Delta)^s (a |x|^{2s-N}) = delta_0."""
    N, s = params.N, params.s
    return math.exp(math.lgamma((N - 2 * s) / 2) - 2 * s * math.log(2)
                    - (N / 2) * math.log(math.pi) - math.lgamma(s))


def torsion_constant(params: Params) -> float:
    """gamma with (-Delta)^s [gamma (R^2 - |x|^2)_+^s] = 1 in B_R."""
    N, s = params.N, params.s
    return math.exp(math.lgamma(N / 2) - 2 * s * math.log(2) - math.lgamma((N + 2 * s) / 2)
                    - math.lgamma(1 + s))


def green_kernel(params: Params, R: float, x_r, y_r, cos_angle):
    """G(x, y) for |x| = x_r, |y| = y_r and cos of the angle between them."""
    x_r, y_r, c = (np.asarray(v, dtype=float) for v in (x_r, y_r, cos_angle))
    if np.any(x_r >= R) or np.any(y_r >= R) or np.any(x_r < 0) or np.any(y_r < 0):
        raise ValueError("points must lie inside the ball")
    d2 = (x_r - y_r) ** 2 + 2 * x_r * y_r * (1 - c)
    if np.any(d2 <= 0):
        raise ValueError("green_kernel is singular at coincident points")
    out = _green_from_d2(params, R, d2, (R * R - x_r * x_r) * (R * R - y_r * y_r))
    return float(out) if np.ndim(out) == 0 else out


def _green_from_d2(params, R, d2, P):
    N, s = params.N, params.s
    a = N / 2 - s
    v = P / (R * R * d2 + P)
    return green_kappa(params) * special.beta(s, a) * d2 ** (s - N / 2) * special.betainc(s, a, v)


def _regular_from_d2(params, R, d2, P):
    """H = Phi - G = kappa B d^{2s-N} I_w(N/2-s, s), w = R^2 d^2/(R^2 d^2 + P)."""
    N, s = params.N, params.s
    a = N / 2 - s
    w = R * R * d2 / (R * R * d2 + P)
    return green_kappa(params) * special.beta(s, a) * d2 ** (s - N / 2) * special.betainc(a, s, w)


def _angular_average(fun_d2, N, r, rho, scale, width=0.75, order=16):
    """int_{S^{N-1}} F(|r e1 - rho w|^2) d sigma for paired arrays r, rho.

    theta = a sinh(v) on [0, pi/2] with a = scale/sqrt(r rho) resolves structure
    of width `scale` in |x - y| near theta = 0; GL covers [pi/2, pi].
    """
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if N == 1:
        return fun_d2((r - rho) ** 2, r, rho) + fun_d2((r + rho) ** 2, r, rho)
    out = np.zeros_like(r)
    a = np.maximum(scale / np.sqrt(r * rho), 1e-300)
    vmax = np.arcsinh(np.pi / 2 / a)
    npan = np.clip(np.ceil(vmax / width), 1, 80).astype(int)
    t, w = gauss_legendre(order)
    for k in np.unique(npan):
        sel = np.nonzero(npan == k)[0]
        ak, vk = a[sel][:, None], vmax[sel][:, None]
        rk, pk = r[sel][:, None], rho[sel][:, None]
        acc = np.zeros(len(sel))
        for j in range(k):
            lo, hi = vk * j / k, vk * (j + 1) / k
            v = (lo + hi) / 2 + (hi - lo) / 2 * t
            th = ak * np.sinh(v)
            d2 = (rk - pk) ** 2 + 4 * rk * pk * np.sin(th / 2) ** 2
            f = fun_d2(d2, rk, pk) * ak * np.cosh(v)
            if N != 2:
                f = f * np.sin(th) ** (N - 2)
            acc += ((hi - lo) / 2 * f) @ w
        out[sel] = acc
    t2, w2 = gauss_legendre(2 * order)
    th = 3 * np.pi / 4 + np.pi / 4 * t2
    rk, pk = r[:, None], rho[:, None]
    d2 = (rk - pk) ** 2 + 4 * rk * pk * np.sin(th / 2) ** 2
    f = fun_d2(d2, rk, pk)
    if N != 2:
        f = f * np.sin(th) ** (N - 2)
    out += np.pi / 4 * (f @ w2)
    return sphere_area(N - 1) * out


def radial_green(params: Params, R: float, r, rho):
    """Angular average of G(r e1, rho w) over the sphere (direct formula)."""
    r, rho = np.broadcast_arrays(np.asarray(r, float), np.asarray(rho, float))
    r, rho = r.ravel(), rho.ravel()

    def F(d2, rr, pp):
        return _green_from_d2(params, R, d2, (R * R - rr * rr) * (R * R - pp * pp))

    Pp = (R * R - r * r) * (R * R - rho * rho) / (R * R)
    scale = np.minimum(np.abs(r - rho), np.sqrt(Pp))
    return _angular_average(F, params.N, r, rho, scale)


def radial_riesz(params: Params, r, rho=None, x=None):
    """Angular average of kappa B(s, N/2-s) |x-y|^{2s-N}; pass rho or x = ln(rho/r)."""
    N, s = params.N, params.s
    mu = (N - 2 * s) / 2
    cst = green_kappa(params) * special.beta(s, N / 2 - s)
    r = np.asarray(r, dtype=float)
    if x is None:
        x = np.log(np.asarray(rho, dtype=float) / r)
    x = np.asarray(x, dtype=float)
    return cst * r ** (-2 * mu) * np.exp(-mu * x) * log_kernel(N, mu, x)


def radial_regular(params: Params, R: float, r, rho):
    r, rho = np.broadcast_arrays(np.asarray(r, float), np.asarray(rho, float))
    r, rho = r.ravel(), rho.ravel()

    def F(d2, rr, pp):
        return _regular_from_d2(params, R, d2, (R * R - rr * rr) * (R * R - pp * pp))

    Pp = (R * R - r * r) * (R * R - rho * rho) / (R * R)
    scale = np.sqrt((r - rho) ** 2 + Pp)
    return _angular_average(F, params.N, r, rho, scale)


# ---------------------------------------------------------------------------
# discretization on the unit ball

@dataclass(frozen=True)
class GreenGridSpec:
    """Output grid and source quadrature for radial Green solves (unit ball).

    Source cells are uniform in z = logit(rho), so they are log-spaced near the
    origin and geometrically refined toward the boundary. The output grid is
    n_out log-spaced nodes plus n_edge nodes uniform in logit(r) on [1/2, 1),
    which resolve the (1 - r)^s boundary layer of solutions.
    """

    n_out: int = 400
    n_edge: int = 48
    r_lo: float = 1e-12
    edge_gap: float = 1e-3
    cell_width: float = 0.14
    n_gauss: int = 8
    near_cells: int = 3
    pad_cells: int = 6
    rho_hi_gap: float = 1e-10
    tail_panels: int = 24


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _expit(z):
    return special.expit(z)


def _lagrange_matrix(nodes, x):
    """L[j, k] = l_k(x_j) for the Lagrange basis on `nodes`."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(nodes)
    L = np.ones((len(x), n))
    for k in range(n):
        for m in range(n):
            if m != k:
                L[:, k] *= (x - nodes[m]) / (nodes[k] - nodes[m])
    return L


@dataclass(frozen=True, eq=False)
class GreenContext:
    """Precomputed radial Green weights for the unit ball (immutable once built).

    u(r_i) = sum_q W[i, q] f(rho_q) + sum_t Wt[i, t] q(t) on the unit ball, where
    q(t) = f(e^{-t}) e^{-Nt} on the inner tail t = -ln rho. A ball of radius R
    rescales the nodes by R and the result by R^{2s}.
    """

    params: Params
    spec: GreenGridSpec
    r_out: np.ndarray
    rho_src: np.ndarray
    W: np.ndarray
    t_tail: np.ndarray
    W_tail: np.ndarray
    mass_src: np.ndarray = field(repr=False)
    mass_tail: np.ndarray = field(repr=False)

    def apply_values(self, f_src, q_tail, R=1.0):
        return R ** (2 * self.params.s) * (self.W @ f_src + self.W_tail @ q_tail)

    def tail_q(self, tail: PowerLogTail, R=1.0):
        """q(t) = f(R e^{-t}) e^{-Nt} for a power-log tail f = a r^tau (-ln r)^m."""
        t = self.t_tail
        if tail.coeff == 0:
            return np.zeros_like(t)
        if tail.m != 0 and np.any(t - math.log(R) <= 0):
            raise ValueError("log tail needs radii below 1")
        lg = tail.tau * math.log(R) - (tail.tau + self.params.N) * t
        if tail.m != 0:
            lg = lg + tail.m * np.log(t - math.log(R))
        return tail.coeff * np.exp(lg)


def _near_weights(params, r_i, za, zb, znodes, q=0.15, sub_order=8):
    """Product weights int_{za}^{zb} l_k(z) rho^N (1-rho) Phi_bar(r_i, rho) dz."""
    s = params.s
    zi = float(_logit(r_i))
    h = zb - za
    levels = int(math.ceil(16 * math.log(10) / (max(2 * s, 0.05) * -math.log(q)))) + 2
    offs = h * q ** np.arange(levels + 1)
    # panels live in the offset d = z - zi so tiny offsets survive rounding
    pts = np.concatenate([[za - zi, zb - zi], -offs, offs])
    pts = np.unique(pts[(pts >= za - zi) & (pts <= zb - zi)])
    t, w = gauss_legendre(sub_order)
    lo, hi = pts[:-1], pts[1:]
    dz = (((lo + hi)[:, None] + (hi - lo)[:, None] * t) / 2).ravel()
    wz = ((hi - lo)[:, None] / 2 * w).ravel()
    z = zi + dz
    rho = _expit(z)
    x = dz - np.log1p(r_i * np.expm1(dz))  # ln(rho/r_i) without cancellation
    ker = rho ** params.N * (1 - rho) * radial_riesz(params, r_i, x=x)
    L = _lagrange_matrix(znodes, z)
    return (wz * ker) @ L


@lru_cache(maxsize=8)
def build_context(params: Params, spec: GreenGridSpec = GreenGridSpec()) -> GreenContext:
    N = params.N
    r_out = np.geomspace(spec.r_lo, 1 - spec.edge_gap, spec.n_out)
    if spec.n_edge:
        # extra nodes uniform in logit(r) toward the boundary layer
        extra = _expit(np.linspace(0.0, float(_logit(1 - spec.edge_gap)), spec.n_edge + 1)[:-1])
        r_out = np.union1d(r_out, extra)
        keep = np.concatenate([[True], np.diff(np.log(r_out)) > 1e-8])
        r_out = r_out[keep]
    z_out = _logit(r_out)
    h = spec.cell_width
    z_lo = z_out[0] - spec.pad_cells * h
    z_hi = float(_logit(1 - spec.rho_hi_gap))
    ncell = int(math.ceil((z_hi - z_lo) / h))
    edges = z_lo + h * np.arange(ncell + 1)
    t, w = gauss_legendre(spec.n_gauss)
    zc = ((edges[:-1] + edges[1:])[:, None] + h * t) / 2  # (ncell, n_gauss)
    wz = np.broadcast_to(h / 2 * w, zc.shape)
    rho = _expit(zc)
    jac = (rho ** N * (1 - rho)).ravel()  # f rho^{N-1} d rho = f rho^N (1-rho) dz
    rho_src = rho.ravel()
    wsrc = wz.ravel() * jac

    # far-field weights from the full kernel, Phi_bar - H_bar
    ri = np.repeat(r_out, len(rho_src))
    rq = np.tile(rho_src, len(r_out))
    phi = radial_riesz(params, ri, rq).reshape(len(r_out), -1)
    reg = np.empty_like(phi)
    chunk = 20
    for i0 in range(0, len(r_out), chunk):
        sl = slice(i0, min(i0 + chunk, len(r_out)))
        rr = np.repeat(r_out[sl], len(rho_src))
        pp = np.tile(rho_src, sl.stop - sl.start)
        reg[sl] = radial_regular(params, 1.0, rr, pp).reshape(sl.stop - sl.start, -1)
    G = phi - reg
    bad = G < 1e-3 * phi  # strong cancellation near the boundary: use the direct form
    if np.any(bad):
        ib, jb = np.nonzero(bad)
        G[ib, jb] = radial_green(params, 1.0, r_out[ib], rho_src[jb])
    W = G * wsrc

    # near cells: replace the plain rule for the singular Riesz part
    cell_of = np.floor((z_out - z_lo) / h).astype(int)
    for i, ri_ in enumerate(r_out):
        c0 = cell_of[i]
        for c in range(max(c0 - spec.near_cells, 0), min(c0 + spec.near_cells + 1, ncell)):
            cols = slice(c * spec.n_gauss, (c + 1) * spec.n_gauss)
            wn = _near_weights(params, ri_, edges[c], edges[c + 1], zc[c])
            W[i, cols] += wn - wsrc[cols] * phi[i, cols]

    # inner tail: t = -ln rho in [T0, inf), t = T0 / xi with xi graded toward 0;
    # these weights act on q = f rho^N (evaluated in log space by the caller)
    rho_cut = float(_expit(z_lo))
    T0 = -math.log(rho_cut)
    xe = np.concatenate([[0.0], np.geomspace(1e-6, 1.0, spec.tail_panels)])
    tt, ww = gauss_legendre(spec.n_gauss)
    xi = ((xe[:-1] + xe[1:])[:, None] + (xe[1:] - xe[:-1])[:, None] * tt) / 2
    wxi = ((xe[1:] - xe[:-1])[:, None] / 2 * ww).ravel()
    xi = xi.ravel()
    t_tail = T0 / xi
    wt = wxi * T0 / xi ** 2
    rho_eval = np.maximum(np.exp(-t_tail), 1e-250)
    Gt = np.empty((len(r_out), len(t_tail)))
    for i, ri_ in enumerate(r_out):
        Gt[i] = radial_green(params, 1.0, np.full(len(t_tail), ri_), rho_eval)
    W_tail = Gt * wt
    ctx = GreenContext(params=params, spec=spec, r_out=r_out, rho_src=rho_src, W=W,
                       t_tail=t_tail, W_tail=W_tail, mass_src=wsrc, mass_tail=wt)
    for arr in (r_out, rho_src, W, t_tail, W_tail, wsrc, wt):
        arr.flags.writeable = False
    return ctx


# ---------------------------------------------------------------------------
# Poisson solves

class GreenError(RuntimeError):
    """Non-integrable data or a failed solve on the ball."""


@dataclass(frozen=True)
class BallProblem:
    """(-Delta)^s u = rhs in B_R, u = 0 outside; rhs radial on (0, R)."""

    params: Params
    R: float
    rhs: RadialField

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("ball radius must be positive")
        check_integrable(self.params, self.rhs)


def check_integrable(params: Params, rhs: RadialField):
    """Raise GreenError unless int_0 |rhs| rho^{N-1} d rho converges at the origin."""
    tail = rhs.inner_tail
    if tail is None or tail.coeff == 0:
        return
    N = params.N
    if tail.tau > -N + 1e-12:
        return
    if abs(tail.tau + N) <= 1e-12 and tail.m < -1:
        return
    raise GreenError(f"rhs tail r^{tail.tau:g} (-ln r)^{tail.m:g} is not integrable at 0")


def _output_tail_shape(params: Params, tail: PowerLogTail | None):
    """(tau, m) of the solution near 0 for a rhs tail a r^tau_f (-ln r)^m_f."""
    N, s = params.N, params.s
    if tail is None or tail.coeff == 0 or tail.tau > -2 * s + 1e-12:
        return 0.0, 0.0
    if abs(tail.tau + 2 * s) <= 1e-12:
        return 0.0, tail.m + 1
    if tail.tau > -N + 1e-12:
        return tail.tau + 2 * s, tail.m
    return 2 * s - N, tail.m + 1


def _source_values(rhs: RadialField, rho):
    with np.errstate(over="ignore", invalid="ignore"):
        f = np.asarray(rhs(rho), dtype=float)
    if not np.all(np.isfinite(f)):
        raise GreenError("rhs is not finite at the source nodes")
    return f


def _tail_values(ctx: GreenContext, rhs: RadialField, R: float):
    if rhs.inner_tail is not None:
        return ctx.tail_q(rhs.inner_tail, R)
    t = ctx.t_tail
    rho = np.maximum(R * np.exp(-t), 1e-300)
    with np.errstate(over="ignore", invalid="ignore"):
        q = _source_values(rhs, rho) * np.exp(-ctx.params.N * t)
    if not np.all(np.isfinite(q)):
        raise GreenError("rhs without inner tail is not integrable at 0")
    return q


def green_apply(problem: BallProblem, quad: QuadratureSpec | None = None,
                spec: GreenGridSpec = GreenGridSpec()) -> RadialField:
    """G_s[f] on B_R for radial f, sampled on R * ctx.r_out.

    The accuracy is set by `spec` (a fixed product rule); `quad` is accepted for
    interface symmetry with the other operators and is otherwise unused.
    """
    params, R, rhs = problem.params, problem.R, problem.rhs
    ctx = build_context(params, spec)
    f = _source_values(rhs, R * ctx.rho_src)
    q = _tail_values(ctx, rhs, R)
    u = ctx.apply_values(f, q, R)
    if not np.all(np.isfinite(u)):
        raise GreenError("Green solve produced non-finite values")
    grid = R * ctx.r_out
    tau, m = _output_tail_shape(params, rhs.inner_tail)
    shape = PowerLogTail(tau, m, 1.0)(grid[0])
    inner = PowerLogTail(tau, m, float(u[0] / shape))
    positive = bool(np.all(u > 0))
    return RadialField(grid=grid, values=u, inner_tail=inner,
                       outer_tail=OuterTail(kind="zero", support=R, edge_exponent=params.s),
                       interp="log" if positive else "linear", name="green")


@dataclass(frozen=True)
class ZeroLimitTrend:
    """r^{N-2s} u(r) at decade points of the innermost two decades (inward order)."""

    radii: tuple
    weighted: tuple
    decreasing: bool


def zero_limit_trend(u: RadialField, params: Params, decades: int = 2) -> ZeroLimitTrend:
    r0 = u.r_min
    radii = r0 * 10.0 ** np.arange(decades, -1, -1)
    vals = np.abs(u(radii)) * radii ** (params.N - 2 * params.s)
    dec = bool(np.all(np.diff(vals) < 0))
    return ZeroLimitTrend(tuple(radii.tolist()), tuple(vals.tolist()), dec)


def poisson_solve_zero_limit(problem: BallProblem, quad: QuadratureSpec | None = None,
                             spec: GreenGridSpec = GreenGridSpec(), strict: bool = True):
    """The solution with r^{N-2s} u -> 0 at the origin, i.e. G_s[f].

    Returns (u, trend); with strict=True a non-decreasing trend raises GreenError.
    """
    u = green_apply(problem, quad, spec)
    trend = zero_limit_trend(u, problem.params)
    if strict and not trend.decreasing:
        raise GreenError(f"r^(N-2s) u does not decrease toward 0: {trend.weighted}")
    return u, trend
