"""Radial fields: grid values with interpolation and power-log tail models."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class PowerLogTail:
    """a * r^tau * (-ln r)^m (the log factor needs r < 1)."""

    tau: float
    m: float
    coeff: float

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.coeff * r ** self.tau
            if self.m != 0:
                out = out * (-np.log(r)) ** self.m
        return out


@dataclass(frozen=True)
class OuterTail:
    """Beyond the last node: 'zero' past support, or a power law a r^tau.

    For kind='zero' with an edge_exponent e the field behaves like
    (1 - (r/support)^2)^e near the support: grid values are divided by that
    weight before interpolation and the quotient is held constant past the last
    node. edge_exponent=None means the field simply vanishes past the last node.
    """

    kind: str = "zero"
    support: float = np.inf
    edge_exponent: Optional[float] = None
    coeff: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "power"):
            raise ValueError(f"unknown outer tail kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class RadialField:
    """A radial function u(|x|) on (0, inf).

    Either `exact` (a vectorized callable) or grid values define the field;
    with grid values the interpolant is a cubic spline in ln r of either
    ln u (interp='log', positive fields) or u (interp='linear').
    `breakpoints` lists radii where the field is only finitely smooth, so
    quadratures can align panels with them. `weight` = (tau, m) makes the spline
    act on u / (r^tau (-ln r)^m) instead, for fields with a known singular scale
    (needs r < 1 on the grid).
    """

    grid: np.ndarray
    values: np.ndarray
    inner_tail: Optional[PowerLogTail] = None
    outer_tail: OuterTail = field(default_factory=OuterTail)
    interp: str = "linear"
    exact: Optional[Callable] = None
    breakpoints: tuple = ()
    name: str = ""
    weight: Optional[tuple] = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ValueError("grid and values must be 1-D arrays of equal length")
        if len(grid) < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
            raise ValueError("grid must be positive and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if self.interp not in ("linear", "log"):
            raise ValueError("interp must be 'linear' or 'log'")
        if self.interp == "log" and np.any(values <= 0):
            raise ValueError("log interpolation needs positive values")
        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if self.weight is not None and grid[-1] >= 1:
            raise ValueError("a power-log weight needs a grid inside the unit ball")
        if self.exact is None:
            values = values / self._weight(grid)
            y = np.log(values) if self.interp == "log" else values
            object.__setattr__(self, "_spline", CubicSpline(np.log(grid), y, bc_type="not-a-knot"))

    @property
    def r_min(self) -> float:
        return float(self.grid[0])

    @property
    def r_max(self) -> float:
        return float(self.grid[-1])

    @property
    def support(self) -> float:
        ot = self.outer_tail
        return ot.support if ot.kind == "zero" else np.inf

    def _has_edge(self) -> bool:
        ot = self.outer_tail
        return (ot.kind == "zero" and ot.edge_exponent is not None
                and ot.support > self.grid[-1])

    def _edge_weight(self, r):
        if not self._has_edge():
            return np.ones_like(r)
        ot = self.outer_tail
        x = np.clip(r / ot.support, 0.0, 1.0)
        return (-np.expm1(2 * np.log(np.maximum(x, 1e-300)))) ** ot.edge_exponent

    def _weight(self, r):
        w = self._edge_weight(r)
        if self.weight is not None:
            tau, m = self.weight
            w = w * r ** tau * (-np.log(r)) ** m
        return w

    def _interior(self, r):
        y = self._spline(np.log(r))
        y = np.exp(y) if self.interp == "log" else y
        return y * self._weight(r)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if self.exact is not None:
            out = np.asarray(self.exact(r), dtype=float)
            return float(out[0]) if scalar else out
        out = np.zeros_like(r)
        lo, hi = self.r_min, self.r_max
        mid = (r >= lo) & (r <= hi)
        out[mid] = self._interior(r[mid])
        inner = r < lo
        if np.any(inner):
            if self.inner_tail is None:
                raise ValueError("field has no inner tail model below its grid")
            out[inner] = self.inner_tail(r[inner])
        outer = r > hi
        if np.any(outer):
            out[outer] = self._outer(r[outer])
        return float(out[0]) if scalar else out

    def _outer(self, r):
        ot = self.outer_tail
        if ot.kind == "power":
            return ot.coeff * r ** ot.tau
        out = np.zeros_like(r)
        if self._has_edge():
            band = r < ot.support
            last = self.values[-1] / self._weight(self.grid[-1:])[0]
            out[band] = last * self._weight(r[band])
        return out

    def with_values(self, values, **changes) -> "RadialField":
        return replace(self, values=np.asarray(values, dtype=float), exact=None, **changes)


def analytic_field(fun, grid, inner_tail=None, outer_tail=None, breakpoints=(),
                   name="", interp="linear") -> RadialField:
    """Field defined by an exact callable; grid values are samples for bookkeeping."""
    grid = np.asarray(grid, dtype=float)
    return RadialField(grid=grid, values=np.asarray(fun(grid), dtype=float),
                       inner_tail=inner_tail, outer_tail=outer_tail or OuterTail(),
                       exact=fun, breakpoints=tuple(breakpoints), name=name, interp=interp)


def log_grid(r_lo: float, r_hi: float, n: int) -> np.ndarray:
    return np.geomspace(r_lo, r_hi, n)
