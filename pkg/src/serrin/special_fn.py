"""Closed-form constants: the power symbol C_s(tau), its derivatives, K_s and friends.

All Gamma ratios are evaluated in log form with reciprocal-Gamma factors, so the
zeros of C_s at tau = 0 and tau = 2s - N come out exactly instead of as 0 * inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special


class DomainError(ValueError):
    """Argument outside the domain of a special function or constant."""


@dataclass(frozen=True)
class Params:
    """Dimension N and order s, with the derived critical quantities."""

    N: int
    s: float
    p_star: float = field(init=False)
    m0: float = field(init=False)
    K_s: float = field(init=False)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        if not (0.0 < self.s < 1.0):
            raise DomainError(f"s must lie in (0, 1), got {self.s}")
        if not self.N > 2 * self.s:
            raise DomainError(f"need N > 2s, got N={self.N}, s={self.s}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "p_star", self.N / (self.N - 2 * self.s))
        object.__setattr__(self, "m0", -(self.N - 2 * self.s) / (2 * self.s))
        object.__setattr__(self, "K_s", K_s(self))

    @property
    def tau_fund(self) -> float:
        """Exponent 2s - N of the fundamental solution."""
        return 2 * self.s - self.N

    @property
    def alpha(self) -> float:
        return (self.N - 2 * self.s) / 2


@dataclass(frozen=True)
class ExpansionCoeffs:
    m: float
    tau: float
    B_m: float
    D_m: float
    B_tau_m: float


def _check_positive(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError(f"{name} requires x > 0")
    return x


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    x = _check_positive(x, "log_gamma")
    return _scalar_or_array(special.gammaln(x))


def digamma(x):
    """psi(x) = Gamma'(x)/Gamma(x) for x > 0."""
    x = _check_positive(x, "digamma")
    return _scalar_or_array(special.psi(x))


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n (n=1 gives 2 points)."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def _check_tau(params: Params, tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(~((tau > -params.N) & (tau < 2 * params.s))):
        raise DomainError(f"tau must lie in (-N, 2s) = ({-params.N}, {2 * params.s})")
    return tau


def _zrg(z):
    """z / Gamma(1+z) = 1 / Gamma(z), written so z = 0 gives an exact zero."""
    return z * special.rgamma(1.0 + z)


def _zrg_prime(z):
    """Derivative of 1/Gamma(z), valid for z > -1 including z = 0."""
    return special.rgamma(1.0 + z) * (1.0 - z * special.psi(1.0 + z))


def _symbol_parts(params: Params, tau):
    N, s = params.N, params.s
    a = (N + tau) / 2
    b = (2 * s - tau) / 2
    c = -tau / 2
    d = (N - 2 * s + tau) / 2
    P = 2.0 ** (2 * s) * np.exp(special.gammaln(a) + special.gammaln(b))
    return a, b, c, d, P


def C_s(params: Params, tau):
    """Symbol of (-Delta)^s on |x|^tau: (-Delta)^s |x|^tau = C_s(tau) |x|^(tau - 2s)."""
    tau = _check_tau(params, tau)
    a, b, c, d, P = _symbol_parts(params, tau)
    return _scalar_or_array(P * _zrg(c) * _zrg(d))


def C_s_prime(params: Params, tau):
    """dC_s/dtau via the digamma form; finite through both zeros of C_s."""
    tau = _check_tau(params, tau)
    a, b, c, d, P = _symbol_parts(params, tau)
    dP = P * (special.psi(a) - special.psi(b)) / 2
    R1, R2 = _zrg(c), _zrg(d)
    dR1 = -0.5 * _zrg_prime(c)
    dR2 = 0.5 * _zrg_prime(d)
    return _scalar_or_array(dP * R1 * R2 + P * dR1 * R2 + P * R1 * dR2)


def C_s_prime0(params: Params) -> float:
    N, s = params.N, params.s
    lg = math.lgamma(N / 2) + math.lgamma(s) - math.lgamma((N - 2 * s) / 2)
    return -(2.0 ** (2 * s - 1)) * math.exp(lg)


def C_s_second0(params: Params) -> float:
    N, s = params.N, params.s
    bracket = (special.psi(N / 2) - special.psi(s) + special.psi(1.0)
               - special.psi((N - 2 * s) / 2))
    return C_s_prime0(params) * float(bracket)


def log_shift_coeff(params: Params) -> float:
    """a in u ~ K_s r^{2s-N} (L + a ln L + k)^{m0}, L = -ln r, for singular solutions.

    Balancing the first two inverse-log orders of the equation gives
    a = (1 - m0) C_s''(0) / (2 C_s'(0)).
    """
    return (1 - params.m0) * C_s_second0(params) / (2 * C_s_prime0(params))


def C_s_max(params: Params) -> float:
    """Maximal value of C_s, attained at tau = (2s - N)/2."""
    N, s = params.N, params.s
    lg = 2 * (math.lgamma((N + 2 * s) / 4) - math.lgamma((N - 2 * s) / 4))
    return 2.0 ** (2 * s) * math.exp(lg)


def K_s(params: Params) -> float:
    N, s = params.N, params.s
    e = (N - 2 * s) / (2 * s)
    return (-C_s_prime0(params) * e) ** e


def coeffs(params: Params, tau: float, m: float) -> ExpansionCoeffs:
    tau = float(_check_tau(params, tau))
    m = float(m)
    c1 = C_s_prime0(params)
    c2 = C_s_second0(params)
    return ExpansionCoeffs(m=m, tau=tau, B_m=c1 * m, D_m=c2 * m * (m - 1) / 2,
                           B_tau_m=float(C_s_prime(params, tau)) * m)


def frac_normalization(params: Params) -> float:
    """C_{N,s}, the constant in front of the hypersingular integral."""
    N, s = params.N, params.s
    lg = math.lgamma((N + 2 * s) / 2) - math.lgamma(1 - s)
    return 2.0 ** (2 * s) * math.pi ** (-N / 2) * s * math.exp(lg)


@dataclass(frozen=True)
class ConstantEstimate:
    value: float
    error: float
    converged: bool

    def __float__(self):
        return self.value


def c_s0_constant(params: Params, quad=None) -> ConstantEstimate:
    """c_{s,0} = C_{N,s} |S^{N-1}| int_0^1 int_{B_t} (|z|^{2s-N} - 1)|e1 - z|^{-N-2s} dz dt.

    Swapping the t and radial integrals leaves one radial integral
    int_0^1 rho^{2s-1} (1-rho)^{1-2s} S(rho) d rho with
    S = (1 - rho^{N-2s}) (1-rho)^{2s} K(1, rho), K the angular kernel.
    The value comes from QAWS (algebraic endpoint weights); a Gauss-Jacobi
    rule at two orders supplies an independent cross-check folded into the
    error estimate.
    """
    from .quadrature import QuadratureSpec, gauss_jacobi
    from .fraclap import angular_kernel

    quad = quad or QuadratureSpec()
    N, s = params.N, params.s

    def S(rho):
        # QAWS may sample the endpoints; the integrand has finite limits there
        rho = np.clip(np.asarray(rho, dtype=float), 1e-30, 1 - 2.0 ** -52)
        return (-np.expm1((N - 2 * s) * np.log(rho)) * (1 - rho) ** (2 * s)
                * angular_kernel(params, 1.0, rho))

    val, err = integrate.quad(S, 0.0, 1.0, weight="alg", wvar=(2 * s - 1, 1 - 2 * s),
                              epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                              limit=quad.max_subdivisions)

    def gj(n):
        x, w = gauss_jacobi(n, 1 - 2 * s, 2 * s - 1)
        return 0.5 * float(np.sum(w * S((x + 1) / 2)))

    g1, g2 = gj(40), gj(80)
    err = max(err, abs(g2 - val), abs(g2 - g1))
    scale = frac_normalization(params) * sphere_area(N)
    converged = err <= max(quad.abs_tol, 1e3 * quad.rel_tol * abs(val))
    return ConstantEstimate(value=scale * val, error=scale * err, converged=bool(converged))
