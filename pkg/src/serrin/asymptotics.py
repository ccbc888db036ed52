"""Blow-up rates of radial fields near the origin: leading constant, second-order
coefficient, Harnack ratios and the barrier checks for singular solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import RadialField
from .fraclap import E2
from .special_fn import Params


class AsymptoticsError(ValueError):
    """Bad window or a fit rejected by its quality threshold."""


@dataclass(frozen=True)
class AsymptoticsWindow:
    r_lo: float
    r_hi: float
    per_decade: int = 8

    def __post_init__(self):
        if not (0 < self.r_lo < self.r_hi < E2):
            raise AsymptoticsError("window needs 0 < r_lo < r_hi < e^-2")
        if math.log10(self.r_hi / self.r_lo) < 3 - 1e-9:
            raise AsymptoticsError("window must span at least 3 decades")
        if self.per_decade < 8:
            raise AsymptoticsError("need at least 8 samples per decade")

    @classmethod
    def default(cls, radius: float) -> "AsymptoticsWindow":
        """Eight decades inside a Green grid on B_radius, clear of both ends."""
        return cls(radius * 1e-11, min(radius, E2) * 1e-3)

    def radii(self) -> np.ndarray:
        n = int(math.ceil(self.per_decade * math.log10(self.r_hi / self.r_lo))) + 1
        return np.geomspace(self.r_lo, self.r_hi, max(n, 24))


def leading_ratio(u: RadialField, params: Params, r):
    """u(r) (r (-ln r)^{1/(2s)})^{N-2s}."""
    r = np.asarray(r, dtype=float)
    if np.any(~((r > 0) & (r < E2))):
        raise AsymptoticsError("leading_ratio needs 0 < r < e^-2")
    L = -np.log(r)
    out = u(r) * r ** (params.N - 2 * params.s) * L ** (-params.m0)
    return float(out) if out.ndim == 0 else out


def _fit_inverse_log(r, y):
    """Least squares y = a + b / (-ln r); returns (a, b, rms residual)."""
    x = 1.0 / -np.log(r)
    A = np.column_stack([np.ones_like(x), x])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (a + b * x)
    return float(a), float(b), float(np.sqrt(np.mean(res ** 2)))


def leading_limit(u: RadialField, params: Params, window: AsymptoticsWindow) -> float:
    """Extrapolated limit of leading_ratio with the model a + b/(-ln r)."""
    r = window.radii()
    a, _, _ = _fit_inverse_log(r, leading_ratio(u, params, r))
    return a


def second_order_profile(u: RadialField, params: Params, r):
    """g(r) = (u - K_s (r (-ln r)^{1/(2s)})^{2s-N}) r^{N-2s} (-ln r)^{N/(2s)}."""
    r = np.asarray(r, dtype=float)
    L = -np.log(r)
    N, s = params.N, params.s
    lead = params.K_s * r ** (2 * s - N) * L ** params.m0
    return (u(r) - lead) * r ** (N - 2 * s) * L ** (N / (2 * s))


def second_order_coeff(u: RadialField, params: Params, window: AsymptoticsWindow,
                       raise_on_poor: bool = True):
    """(k, fit_quality): fit g(r) = k + c/(-ln r) over the window.

    fit_quality is the rms residual of the fit; it must not exceed 5% of |k|
    plus 1e-6, otherwise the window is flagged.
    """
    r = window.radii()
    g = second_order_profile(u, params, r)
    if not np.all(np.isfinite(g)):
        raise AsymptoticsError("field is not finite on the window")
    k, _, q = _fit_inverse_log(r, g)
    if raise_on_poor and q > 0.05 * abs(k) + 1e-6:
        raise AsymptoticsError(f"poor second-order fit: rms {q:.3e} for k = {k:.6g}")
    return k, q


def harnack_ratio(u: RadialField, r: float, samples: int = 33) -> float:
    """sup/inf of u over the annulus r <= |x| <= 2r."""
    vals = np.asarray(u(np.geomspace(r, 2 * r, samples)), dtype=float)
    if np.any(vals <= 0):
        raise AsymptoticsError("harnack_ratio needs a positive field")
    return float(vals.max() / vals.min())


@dataclass(frozen=True)
class BarrierReport:
    upper_sup: float
    upper_ok: bool
    taus: tuple
    lower_min: tuple
    lower_increasing: tuple
    passed: bool


def barrier_checks(u: RadialField, params: Params, window: AsymptoticsWindow,
                   fractions=(0.25, 0.5, 0.75)) -> BarrierReport:
    """Upper bound sup u r^{N-2s} < inf and growth of u r^{-tau} toward 0 for
    tau in (2s-N, 0), checked on the innermost decade of the window."""
    N, s = params.N, params.s
    r = window.radii()
    up = float(np.max(u(r) * r ** (N - 2 * s)))
    last = np.geomspace(window.r_lo, 10 * window.r_lo, window.per_decade + 1)
    ul = u(last)
    taus, mins, incs = [], [], []
    for f in fractions:
        tau = f * (2 * s - N)
        y = ul * last ** (-tau)
        taus.append(tau)
        mins.append(float(np.min(y)))
        incs.append(bool(np.all(np.diff(y) < 0)))  # larger as r decreases
    upper_ok = bool(np.isfinite(up))
    return BarrierReport(up, upper_ok, tuple(taus), tuple(mins), tuple(incs),
                         bool(upper_ok and all(incs)))
