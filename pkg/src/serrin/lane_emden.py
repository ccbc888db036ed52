"""Singular solutions of (-Delta)^s u = u^{p*} in B_r minus the origin.

Everything is written for the difference nu = u - v0 with v0 = K_s w_{m0}:
nu vanishes outside B_r and solves (-Delta)^s nu = g with

    g = [(v0 + nu)^{p*} - v0^{p*}] + [v0^{p*} - (-Delta)^s v0].

The first bracket is evaluated as v0^{p*} expm1(p* log1p(nu/v0)), which has no
cancellation; the second (the defect of the sub-solution v0) is computed once
per configuration by quadrature. On the Green grid the update is the linear
map nu -> R^{2s}(W g(M nu) + Wt q), where M interpolates output nodes onto
source nodes and q is the power-log tail of g below the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import linalg

from .fields import OuterTail, PowerLogTail, RadialField
from .fraclap import E2, fraclap_many, make_w_m
from .green_ball import GreenGridSpec, build_context
from .quadrature import QuadratureSpec, map_rule
from .special_fn import Params, coeffs, log_shift_coeff, sphere_area


class SolveError(RuntimeError):
    """The iteration left the admissible set (u <= 0) or a solve failed."""


@dataclass(frozen=True)
class SolveConfig:
    params: Params
    ball_radius: float = E2
    max_iters: int = 60
    iter_tol: float = 1e-8
    grid: GreenGridSpec = field(default_factory=GreenGridSpec)
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    method: str = "monotone"
    newton_tol: float = 1e-12
    family_k: float = 0.0

    def __post_init__(self):
        if not (0 < self.ball_radius <= E2 * (1 + 1e-12)):
            raise ValueError(f"ball radius must lie in (0, e^-2], got {self.ball_radius}")
        if self.max_iters < 1 or not self.iter_tol > 0:
            raise ValueError("need max_iters >= 1 and iter_tol > 0")
        if self.method not in ("monotone", "newton"):
            raise ValueError("method must be 'monotone' or 'newton'")


@dataclass(frozen=True)
class SolveReport:
    method: str
    iterates_kept: int
    weighted_diff_norms: tuple
    contraction_ratios: tuple
    final_residual: float
    leading_constant_estimate: float
    second_order_k: float
    second_order_fit: float
    l1_norm: float
    converged: bool
    monotone_chain: bool
    sandwich_Z: float
    sandwich_holds: bool
    message: str = ""


def weighted_norm(params: Params, r, values) -> float:
    """sup |nu(r)| r^{N-2s} (-ln r)^{1-m0}."""
    r = np.asarray(r, dtype=float)
    L = -np.log(r)
    return float(np.max(np.abs(values) * r ** (params.N - 2 * params.s) * L ** (1 - params.m0)))


class OffsetProfile:
    """Vectorized u = v0 + nu; keeps nu so later steps avoid the subtraction."""

    def __init__(self, v0: RadialField, nu: RadialField):
        self.v0 = v0
        self.nu = nu

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.v0(r) + self.nu(r)


def initial_profile(config: SolveConfig) -> RadialField:
    """v0 = K_s w_{m0}, exact, with inner tail (2s-N, m0, K_s)."""
    p = config.params
    w = make_w_m(p, p.m0)
    K = p.K_s

    def v0(r):
        return K * w(r)

    return RadialField(grid=w.grid, values=K * w.values,
                       inner_tail=PowerLogTail(p.tau_fund, p.m0, K),
                       outer_tail=w.outer_tail, exact=v0, breakpoints=w.breakpoints,
                       name="v0", interp="log")


class SingularTail:
    """nu = u - v0 below the grid for u ~ K_s r^{2s-N} (L + a ln L + k)^{m0}.

    k is the free parameter of the singular family with fixed exterior data;
    all differences are evaluated through expm1/log1p, so nothing cancels.
    """

    def __init__(self, params: Params, k: float):
        self.params = params
        self.k = float(k)
        self.a = log_shift_coeff(params)

    def _shift(self, L):
        x = (self.a * np.log(L) + self.k) / L
        if np.any(x <= -1):
            raise SolveError("log-corrected tail is not defined this close to the grid")
        return np.log1p(x)

    def __call__(self, r):
        p = self.params
        r = np.asarray(r, dtype=float)
        L = -np.log(r)
        return p.K_s * r ** p.tau_fund * L ** p.m0 * np.expm1(p.m0 * self._shift(L))

    def power_q(self, t, R):
        """q(t) = [u^{p*} - v0^{p*}](R e^{-t}) e^{-Nt}, in closed form."""
        p = self.params
        L = np.asarray(t, dtype=float) - math.log(R)
        return (p.K_s ** p.p_star * R ** (-p.N) * L ** (p.m0 - 1)
                * np.expm1((p.m0 - 1) * self._shift(L)))


# ---------------------------------------------------------------------------
# discrete work space

@dataclass(frozen=True, eq=False)
class _Work:
    params: Params
    R: float
    ctx: object
    grid: np.ndarray       # output radii R r_out
    src: np.ndarray        # source radii R rho_src
    below: np.ndarray      # source nodes below the grid
    v0: RadialField
    v0_grid: np.ndarray
    v0_src: np.ndarray
    defect_src: np.ndarray
    defect_amp: float      # defect ~ defect_amp r^{-N} L^{m0-2} below the grid
    M: np.ndarray          # spline part of nu_src = M nu_grid + tail
    q_defect: np.ndarray   # tail values of r^{-N} L^{m0-2}

    def _power_tail(self, nu):
        """Closure used by the plain iteration: nu ~ Z r^{2s-N} L^{m0-1}, continuous at grid[0]."""
        p = self.params
        shape = PowerLogTail(p.tau_fund, p.m0 - 1, 1.0)
        return PowerLogTail(p.tau_fund, p.m0 - 1, float(nu[0] / shape(self.grid[0])))

    def tail_for(self, nu, tail):
        return self._power_tail(nu) if tail is None else tail

    def nu_field(self, nu, tail=None):
        p = self.params
        return RadialField(grid=self.grid, values=np.asarray(nu, dtype=float),
                           inner_tail=self.tail_for(nu, tail),
                           outer_tail=OuterTail("zero", support=self.R, edge_exponent=p.s),
                           name="nu", weight=(p.tau_fund, p.m0 - 1))

    def nu_src(self, nu, tail=None):
        out = self.M @ nu
        out[self.below] = self.tail_for(nu, tail)(self.src[self.below])
        return out

    def g_src(self, nu_src):
        p = self.params
        x = nu_src / self.v0_src
        if np.any(x <= -1):
            raise SolveError("iterate is not positive")
        return self.v0_src ** p.p_star * np.expm1(p.p_star * np.log1p(x)) + self.defect_src

    def q_tail(self, nu, tail=None):
        p = self.params
        q = self.q_defect * self.defect_amp
        if tail is None:
            # p* v0^{p*-1} Z r^{2s-N} L^{m0-1} = p* B_{m0} Z r^{-N} L^{m0-2}
            B = coeffs(p, 0.0, p.m0).B_m
            return q + self.q_defect * p.p_star * B * self._power_tail(nu).coeff
        return q + tail.power_q(self.ctx.t_tail, self.R)

    def T(self, nu, tail=None):
        """G[g] on grid values: one step of the monotone iteration."""
        g = self.g_src(self.nu_src(nu, tail))
        return self.ctx.apply_values(g, self.q_tail(nu, tail), self.R)

    def jacobian(self, nu, tail):
        """dT/dnu with the tail below the grid held fixed."""
        p = self.params
        x = self.nu_src(nu, tail) / self.v0_src
        dg = p.p_star * self.v0_src ** (p.p_star - 1) * (1 + x) ** (p.p_star - 1)
        return self.R ** (2 * p.s) * (self.ctx.W @ (dg[:, None] * self.M))

    def solution(self, nu, tail=None) -> RadialField:
        p = self.params
        nuf = self.nu_field(nu, tail)
        prof = OffsetProfile(self.v0, nuf)
        vals = self.v0_grid + nu
        bps = tuple(sorted({self.R, *self.v0.breakpoints}))
        amp = p.K_s * vals[0] / self.v0_grid[0]
        return RadialField(grid=self.grid, values=vals,
                           inner_tail=PowerLogTail(p.tau_fund, p.m0, float(amp)),
                           outer_tail=self.v0.outer_tail, exact=prof, breakpoints=bps,
                           name="u", interp="log")


def _interp_matrix(grid, src, R, s, weight):
    """Spline interpolation (with the boundary weight) as a matrix; zero below the grid."""
    n = len(grid)
    cols = np.empty((len(src), n))
    eye = np.eye(n)
    zero = PowerLogTail(0.0, 0.0, 0.0)
    for j in range(n):
        f = RadialField(grid=grid, values=eye[j], inner_tail=zero,
                        outer_tail=OuterTail("zero", support=R, edge_exponent=s), weight=weight)
        cols[:, j] = f(src)
    return cols


@lru_cache(maxsize=4)
def _work(params: Params, R: float, grid_spec: GreenGridSpec, quad: QuadratureSpec) -> _Work:
    p = params
    ctx = build_context(p, grid_spec)
    grid = R * ctx.r_out
    src = R * ctx.rho_src
    cfg = SolveConfig(p, ball_radius=R, grid=grid_spec, quad=quad)
    v0 = initial_profile(cfg)
    v0_src = v0(src)
    lap, _, _ = fraclap_many(p, v0, src, quad)
    defect = v0_src ** p.p_star - lap
    shape_d = PowerLogTail(-p.N, p.m0 - 2, 1.0)
    defect_amp = float(defect[0] / shape_d(src[0]))
    M = _interp_matrix(grid, src, R, p.s, (p.tau_fund, p.m0 - 1))
    below = src < grid[0]
    for arr in (grid, src, below, v0_src, defect, M):
        arr.flags.writeable = False
    return _Work(params=p, R=R, ctx=ctx, grid=grid, src=src, below=below, v0=v0,
                 v0_grid=v0(grid), v0_src=v0_src, defect_src=defect, defect_amp=defect_amp,
                 M=M, q_defect=ctx.tail_q(shape_d, R))


def work_space(config: SolveConfig) -> _Work:
    return _work(config.params, float(config.ball_radius), config.grid, config.quad)


# ---------------------------------------------------------------------------
# iteration

def _nu_of(work: _Work, v: RadialField):
    if isinstance(v.exact, OffsetProfile):
        return v.exact.nu(work.grid)
    return v(work.grid) - work.v0_grid


def iterate(config: SolveConfig, v_prev: RadialField) -> RadialField:
    """v_n = v0 + G[g(v_{n-1} - v0)] on B_r."""
    work = work_space(config)
    return work.solution(work.T(_nu_of(work, v_prev)))


def _iterate_monotone(config, work):
    p = config.params
    nu = np.zeros(len(work.grid))
    chain = [nu]
    norms, ratios = [], []
    monotone = True
    converged = False
    msg = ""
    for _ in range(config.max_iters):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                new = work.T(nu)
        except SolveError as exc:
            msg = str(exc)
            break
        if not np.all(np.isfinite(new)):
            msg = "iterate overflowed"
            break
        monotone = monotone and bool(np.all(new >= nu))
        d = weighted_norm(p, work.grid, new - nu)
        if norms:
            ratios.append(d / norms[-1] if norms[-1] > 0 else 0.0)
        norms.append(d)
        nu = new
        chain.append(nu)
        if d < config.iter_tol:
            converged = True
            break
    if not converged and not msg:
        msg = f"no convergence in {config.max_iters} iterations"
    return nu, chain, norms, ratios, monotone, converged, msg, None, None


def _solve_newton(config, work, theta0=None):
    """Newton on theta = ln(u/v0) at the grid nodes, so u stays positive.

    F(theta) = nu(theta) - T(nu(theta)) with nu = v0 expm1(theta); the step is
    damped until the weighted residual decreases.
    """
    p = config.params
    n = len(work.grid)
    v0 = work.v0_grid
    theta = np.zeros(n) if theta0 is None else np.asarray(theta0, dtype=float).copy()

    tail = SingularTail(p, config.family_k)

    def resid(th):
        # trial steps of the line search may overflow; they are rejected below
        with np.errstate(over="ignore", invalid="ignore"):
            nu = v0 * np.expm1(th)
            return nu, nu - work.T(nu, tail)

    def size(F):
        return weighted_norm(p, work.grid, F)

    norms, ratios = [], []
    converged = False
    msg = ""
    nu, F = resid(theta)
    for _ in range(config.max_iters):
        dnu = v0 * np.exp(theta)
        A = np.eye(n) - work.jacobian(nu, tail)
        step = -linalg.solve(A, F) / dnu
        f0 = size(F)
        lam = 1.0
        while True:
            trial = theta + lam * step
            try:
                nu_t, F_t = resid(trial)
                ok = np.all(np.isfinite(F_t)) and size(F_t) < (1 - 1e-4 * lam) * f0
            except SolveError:
                ok = False
            if ok or lam < 1e-8:
                break
            lam /= 2
        if not ok:
            msg = "Newton line search failed"
            break
        d = weighted_norm(p, work.grid, nu_t - nu)
        if norms:
            ratios.append(d / norms[-1] if norms[-1] > 0 else 0.0)
        norms.append(d)
        theta, nu, F = trial, nu_t, F_t
        if d < config.iter_tol and size(F) < config.iter_tol:
            converged = True
            break
    if not converged and not msg:
        msg = f"Newton did not converge in {config.max_iters} steps"
    return nu, [np.zeros(n), nu], norms, ratios, True, converged, msg, tail, theta


def equation_residual(params: Params, u: RadialField, radii, quad=None):
    """((-Delta)^s u - u^{p*}) r^N (-ln r)^{1-m0} at the given radii."""
    radii = np.asarray(radii, dtype=float)
    lap, _, _ = fraclap_many(params, u, radii, quad)
    res = lap - u(radii) ** params.p_star
    return res * radii ** params.N * (-np.log(radii)) ** (1 - params.m0)


def residual_radii(work: _Work, count: int = 40):
    """Grid radii in [R 1e-8, R/2]: clear of the tail-matching layer at the inner
    end of the grid and of the (R - r)^s boundary layer."""
    g = work.grid
    sel = g[(g >= work.R * 1e-8) & (g <= 0.5 * work.R)]
    idx = np.unique(np.linspace(0, len(sel) - 1, count).round().astype(int))
    return sel[idx]


def sandwich_constant(params: Params, r, nu):
    """Smallest Z with nu <= Z r^{2s-N} (-ln r)^{m0-1}; also whether nu >= 0."""
    r = np.asarray(r, dtype=float)
    scale = r ** params.tau_fund * (-np.log(r)) ** (params.m0 - 1)
    return float(np.max(nu / scale)), bool(np.all(nu >= 0))


def l1_norm(params: Params, u: RadialField, R: float, spec: GreenGridSpec = GreenGridSpec()):
    """int_{B_R} u dx by the Green source rule plus the inner-tail rule."""
    ctx = build_context(params, spec)
    vals = u(R * ctx.rho_src)
    tail = u.inner_tail
    q = ctx.tail_q(tail, R) if tail is not None else 0.0 * ctx.t_tail
    total = R ** params.N * (ctx.mass_src @ vals + ctx.mass_tail @ q)
    return float(sphere_area(params.N) * total)


def solve(config: SolveConfig, window=None):
    """Returns (u, report). method='monotone' runs the monotone iteration from v0;
    method='newton' solves nu = T(nu) by Newton's method on the same grid."""
    from .asymptotics import AsymptoticsWindow, leading_limit, second_order_coeff

    p = config.params
    work = work_space(config)
    if config.method == "monotone":
        out = _iterate_monotone(config, work)
    else:
        out = _solve_newton(config, work)
    nu, chain, norms, ratios, monotone, converged, msg, tail, _ = out
    u = work.solution(nu, tail)
    radii = residual_radii(work)
    with np.errstate(over="ignore", invalid="ignore"):
        try:
            res = float(np.max(np.abs(equation_residual(p, u, radii, config.quad))))
        except (ValueError, FloatingPointError):
            res = math.inf
        if not np.isfinite(res):
            res = math.inf
    Z, nonneg = sandwich_constant(p, work.grid, nu)
    window = window or AsymptoticsWindow.default(work.R)
    lead, k, fit = math.nan, math.nan, math.nan
    if converged:
        try:
            lead = leading_limit(u, p, window)
            k, fit = second_order_coeff(u, p, window, raise_on_poor=False)
        except (ValueError, FloatingPointError):
            pass
    rep = SolveReport(method=config.method, iterates_kept=len(chain),
                      weighted_diff_norms=tuple(norms), contraction_ratios=tuple(ratios),
                      final_residual=res, leading_constant_estimate=float(lead),
                      second_order_k=float(k), second_order_fit=float(fit),
                      l1_norm=l1_unit_ball(u, p, 1.0, work.R, config.grid), converged=converged,
                      monotone_chain=monotone, sandwich_Z=Z,
                      sandwich_holds=bool(nonneg and np.isfinite(Z)), message=msg)
    return u, rep


def iterate_chain(config: SolveConfig, count: int):
    """The first `count` monotone iterates v_1..v_count as grid arrays of nu."""
    work = work_space(config)
    nu = np.zeros(len(work.grid))
    out = []
    for _ in range(count):
        nu = work.T(nu)
        out.append(nu)
    return work.grid, out


# ---------------------------------------------------------------------------
# error exponent, scaling, family

def refine_error_exponent(u: RadialField, params: Params, window=None) -> float:
    """Slope q of ln|u - K_s w_{m0}| r^{N-2s} against ln(-ln r) over the window."""
    from .asymptotics import AsymptoticsWindow

    window = window or AsymptoticsWindow(1e-12, 1e-4)
    r = window.radii()
    v0 = params.K_s * make_w_m(params, params.m0)(r)
    diff = np.abs(u(r) - v0) * r ** (params.N - 2 * params.s)
    if np.any(diff <= 0) or len(r) < 8:
        raise ValueError("fit window too short or the difference vanishes")
    q, _ = np.polyfit(np.log(-np.log(r)), np.log(diff), 1)
    return float(q)


class _Scaled:
    def __init__(self, u, l, e):
        self.u, self.l, self.e = u, l, e

    def __call__(self, r):
        return self.l ** self.e * self.u(np.asarray(r, dtype=float) / self.l)


def scale_solution(u: RadialField, params: Params, l: float) -> RadialField:
    """u_l(rho) = l^{2s-N} u(rho / l) on B_{l r}, an exact remap of the grid.

    l^{-2s/(p*-1)} = l^{2s-N} is the factor that keeps (-Delta)^s u = u^{p*}.
    """
    if not l >= 1:
        raise ValueError("scale factor must be >= 1")
    if l == 1:
        return u
    e = 2 * params.s - params.N
    grid = l * u.grid
    vals = l ** e * u.values
    t = u.inner_tail
    tail = None
    if t is not None:
        shape = PowerLogTail(t.tau, t.m, 1.0)
        tail = PowerLogTail(t.tau, t.m, float(vals[0] / shape(grid[0])))
    ot = u.outer_tail
    if ot.kind == "zero":
        ot = replace(ot, support=l * ot.support)
    else:
        ot = replace(ot, coeff=ot.coeff * l ** (e - ot.tau))
    return RadialField(grid=grid, values=vals, inner_tail=tail, outer_tail=ot,
                       exact=_Scaled(u, l, e), breakpoints=tuple(l * b for b in u.breakpoints),
                       name=f"{u.name}_l", interp=u.interp)


@dataclass(frozen=True)
class FamilyEntry:
    l: float
    k: float
    fit_quality: float
    l1_norm: float


def l1_unit_ball(u: RadialField, params: Params, l: float, radius: float,
                 spec: GreenGridSpec = GreenGridSpec()) -> float:
    """||u_l||_{L^1(B_1)} = l^{2s} ||u||_{L^1(B_{1/l})}, split at the ball radius."""
    N = params.N
    inner = l1_norm(params, u, min(radius, 1 / l), spec)
    outer = 0.0
    if 1 / l > radius:
        # u = v0 there (smooth): Gauss-Legendre on geometric panels
        x, w = np.polynomial.legendre.leggauss(32)
        edges = np.geomspace(radius, 1 / l, 9)
        rho, wts = map_rule(x, w, edges[:-1], edges[1:])
        outer = sphere_area(N) * float(np.sum(wts * u(rho) * rho ** (N - 1)))
    return l ** (2 * params.s) * (inner + outer)


def family_sweep(config: SolveConfig, l_values, u: RadialField | None = None, window=None):
    """(l, k, L^1(B_1)) along the scaled family u_l, sorted by k.

    The family uses the exact scaling of the base solution instead of a re-solve;
    the truncation correction to B_1 is lower order and does not move k.
    """
    from .asymptotics import AsymptoticsWindow, second_order_coeff

    p = config.params
    if u is None:
        u, rep = solve(config)
        if not rep.converged:
            raise SolveError("base solve did not converge")
    window = window or AsymptoticsWindow.default(config.ball_radius)
    out = []
    for l in l_values:
        ul = scale_solution(u, p, float(l))
        k, fit = second_order_coeff(ul, p, window, raise_on_poor=False)
        out.append(FamilyEntry(float(l), float(k), float(fit),
                               l1_unit_ball(u, p, float(l), config.ball_radius, config.grid)))
    return sorted(out, key=lambda e: e.k)
