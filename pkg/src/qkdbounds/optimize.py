"""Deterministic scalar search routines.

Everything here is plain bracketing: golden-section search, bisection on a
sign change, grid scans followed by a golden-section polish, and a
least-squares slope in log-log coordinates. No randomness anywhere, so
repeated calls are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, NoSignChange

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi


@dataclass(frozen=True)
class SearchSpec:
    """Bracket and stopping rule for a one-dimensional search.

    Args:
        lo: Left end of the bracket.
        hi: Right end of the bracket.
        tol: Width of the final bracket.
        max_iter: Iteration cap; exceeding it raises ConvergenceError.
        prefer: Which end wins a tie ("lower" or "upper").
    """

    lo: float
    hi: float
    tol: float = 1e-9
    max_iter: int = 500
    prefer: str = "lower"

    def __post_init__(self):
        if not self.tol > 0:
            raise DomainError(f"tolerance must be positive, got {self.tol}")
        if not self.lo <= self.hi:
            raise DomainError(f"bracket endpoints out of order: [{self.lo}, {self.hi}]")
        if self.prefer not in ("lower", "upper"):
            raise DomainError(f"prefer must be 'lower' or 'upper', got {self.prefer!r}")


def golden_section(f: Callable[[float], float], spec: SearchSpec,
                   maximize: bool = False) -> tuple[float, float]:
    """Golden-section search for a local extremum of ``f`` inside the bracket.

    Returns ``(x*, f(x*))``. The returned point is the best of the interior
    probes and the two bracket ends, so a monotone function yields the
    appropriate endpoint instead of a point ``tol`` away from it.
    """
    sign = -1.0 if maximize else 1.0

    def g(x):
        return sign * f(x)

    a, b = float(spec.lo), float(spec.hi)
    if b - a <= spec.tol:
        x = a if spec.prefer == "lower" else b
        return x, f(x)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    gc, gd = g(c), g(d)
    it = 0
    while b - a > spec.tol:
        it += 1
        if it > spec.max_iter:
            raise ConvergenceError(f"golden_section: no convergence after {spec.max_iter} iterations")
        # ties move toward the preferred end
        if gc < gd or (gc == gd and spec.prefer == "lower"):
            b, d, gd = d, c, gc
            c = b - _INVPHI * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + _INVPHI * (b - a)
            gd = g(d)

    candidates = [(spec.lo, g(spec.lo)), (c, gc), (d, gd), (spec.hi, g(spec.hi))]
    if spec.prefer == "upper":
        candidates.reverse()
    x_best, g_best = candidates[0]
    for x, gx in candidates[1:]:
        if gx < g_best:
            x_best, g_best = x, gx
    return x_best, sign * g_best


class BisectResult(NamedTuple):
    root: float
    lo: float
    hi: float
    evaluations: int


def bisect_sign_change(f: Callable[[float], float], spec: SearchSpec,
                       positive: Callable[[float], bool] | None = None) -> BisectResult:
    """Localize the point where ``f`` changes sign to a bracket of width ``spec.tol``.

    ``positive`` decides which side a value falls on (default ``v > 0``); the
    threshold searches pass a tolerance-aware predicate here. The reported
    root is the bracket midpoint.
    """
    if positive is None:
        def positive(v):
            return v > 0

    a, b = float(spec.lo), float(spec.hi)
    sa, sb = positive(f(a)), positive(f(b))
    n = 2
    if sa == sb:
        raise NoSignChange(f"f has the same sign at both ends of [{a}, {b}]")
    it = 0
    while b - a > spec.tol:
        it += 1
        if it > spec.max_iter:
            raise ConvergenceError(f"bisect_sign_change: no convergence after {spec.max_iter} iterations")
        m = 0.5 * (a + b)
        sm = positive(f(m))
        n += 1
        if sm == sa:
            a = m
        else:
            b = m
    return BisectResult(0.5 * (a + b), a, b, n)


def grid_then_golden(f: Callable[[float], float], lo: float, hi: float,
                     n_grid: int = 200, tol: float = 1e-9, maximize: bool = False,
                     vector_f: Callable[[np.ndarray], np.ndarray] | None = None
                     ) -> tuple[float, float]:
    """Scan ``n_grid + 1`` equispaced points, then polish the best cell by golden section.

    ``vector_f`` may evaluate the whole grid at once; ``f`` is used for the
    polish. The grid winner is kept if the polish does not beat it, which
    protects against objectives that are not unimodal inside the cell.
    """
    if hi <= lo:
        return lo, f(lo)
    xs = np.linspace(lo, hi, n_grid + 1)
    ys = np.asarray(vector_f(xs) if vector_f is not None else [f(x) for x in xs], dtype=float)
    k = int(np.argmax(ys) if maximize else np.argmin(ys))
    spec = SearchSpec(float(xs[max(k - 1, 0)]), float(xs[min(k + 1, n_grid)]), tol=tol)
    x, y = golden_section(f, spec, maximize=maximize)
    better = y > ys[k] if maximize else y < ys[k]
    if better:
        return x, y
    return float(xs[k]), float(ys[k])


def loglog_slope(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of log(r) against log(t).

    Args:
        points: At least four ``(t, r)`` pairs with both coordinates positive.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 4:
        raise DomainError("loglog_slope needs at least 4 (t, r) pairs")
    if np.any(pts <= 0):
        raise DomainError("loglog_slope needs strictly positive t and r")
    slope, _ = np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)
    return float(slope)
