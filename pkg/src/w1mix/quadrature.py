"""Adaptive quadrature primitives.

Everything here integrates scalar functions of one variable.  The rest of the
package funnels its integrals through three entry points:

* ``integrate_with_knots`` -- adaptive Simpson on a finite interval, with
  mandatory subdivision at supplied knots (step discontinuities, kinks).
* ``upper_tail_integral`` -- integral over ``[start, oo)`` by dyadic expansion
  of the upper limit with a Cauchy stopping test.
* ``unit_interval_integral`` -- integral over ``(0, 1)`` with dyadic
  refinement toward both endpoints (integrable singularities allowed).

The tail helpers classify their outcome as converged / diverged / undecided;
callers either consume the status or let the ``*_integral`` wrappers raise
:class:`~w1mix.errors.DivergenceError`.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, InputError

# Outcome labels shared with the condition checker in mixing.py.
CONVERGED = "converged"
DIVERGED = "diverged"
UNDECIDED = "undecided"

# Dyadic expansion / refinement never goes past this exponent:  2**60 for the
# upper limit, 2**-50 toward interval endpoints (1 - 2**-50 is still a
# distinct double, 1 - 2**-60 is not).
_MAX_DOUBLINGS = 64
_ENDPOINT_DEPTH = 50


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances shared by all quadrature-backed operations.

    ``series_floor`` bounds the neglected tail when lag sums over mixing
    coefficients are truncated.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_depth: int = 48
    series_floor: float = 1e-12

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.series_floor > 0):
            raise InputError("quadrature tolerances must be positive")
        if self.max_depth < 10:
            raise InputError("max_depth must be at least 10")


DEFAULT_QUAD = QuadratureConfig()


def _simpson(fa, fm, fb, a, b):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a, b, abs_tol, max_depth=48):
    """Adaptive Simpson rule on [a, b] with Richardson correction.

    Exact (up to roundoff) for integrands that are polynomials of degree
    <= 3 on [a, b]; the callers place knots at kinks so that this happens
    piecewise for step/piecewise-linear integrands.
    """
    if b <= a:
        return 0.0
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = _simpson(fa, fm, fb, a, b)
    return _simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = _simpson(fa, flm, fm, a, m)
    right = _simpson(fm, frm, fb, m, b)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    half = 0.5 * tol
    return _simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1) + _simpson_rec(
        f, m, b, fm, frm, fb, right, half, depth - 1
    )


def integrate_with_knots(f, a, b, knots=(), quad=DEFAULT_QUAD):
    """Integrate f over [a, b], forcing subdivision at the given knots."""
    if b <= a:
        return 0.0
    pts = [a, b]
    for k in knots:
        if a < k < b and math.isfinite(k):
            pts.append(float(k))
    pts = sorted(set(pts))
    tol = quad.abs_tol / max(1, len(pts) - 1)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        total += adaptive_simpson(f, lo, hi, tol, quad.max_depth)
    return total


def _classify_blocks(blocks, floor):
    """Cauchy-style verdict from a sequence of dyadic block contributions."""
    if not blocks or blocks[-1] <= floor:
        return CONVERGED
    tail = blocks[-4:]
    if len(tail) >= 2 and all(t2 >= 0.95 * t1 for t1, t2 in zip(tail[:-1], tail[1:])):
        return DIVERGED
    return UNDECIDED


def tail_integral_status(f, start, quad=DEFAULT_QUAD, knots=()):
    """Integrate f over [start, oo) by dyadic doubling of the upper limit.

    Returns ``(value, status)``; ``value`` is the partial integral when the
    status is not CONVERGED.
    """
    start = float(start)
    hi0 = max(1.0, 2.0 * abs(start))
    total = integrate_with_knots(f, start, hi0, knots, quad)
    floor = quad.abs_tol / 8.0
    blocks = []
    lo = hi0
    for _ in range(_MAX_DOUBLINGS):
        hi = 2.0 * lo
        block = integrate_with_knots(f, lo, hi, knots, quad)
        blocks.append(block)
        total += block
        if block <= max(floor, quad.rel_tol * abs(total) / 8.0):
            # close the remaining tail by geometric extrapolation
            if len(blocks) >= 2 and 0.0 < block < 0.9 * blocks[-2]:
                ratio = block / blocks[-2]
                total += block * ratio / (1.0 - ratio)
            return total, CONVERGED
        lo = hi
    return total, _classify_blocks(blocks, floor)


def upper_tail_integral(f, start, quad=DEFAULT_QUAD, knots=()):
    value, status = tail_integral_status(f, start, quad, knots)
    if status is not CONVERGED:
        raise DivergenceError(
            f"tail integral from {start} failed its Cauchy test ({status})",
            partial=value,
        )
    return value


def unit_interval_status(f, quad=DEFAULT_QUAD, knots=()):
    """Integrate f over (0, 1) with dyadic refinement toward 0 and 1.

    The integrand is never evaluated at 0 or 1; the innermost slivers
    ``(0, 2^-50)`` and ``(1 - 2^-50, 1)`` are dropped once the refinement
    has passed the Cauchy test (their contribution is below any of the
    supported tolerances for an integrable singularity).
    """
    inner = [k for k in knots if 0.25 < k < 0.75]
    total = integrate_with_knots(f, 0.25, 0.75, inner, quad)
    floor = quad.abs_tol / 8.0
    for side in ("left", "right"):
        blocks = []
        done = False
        for j in range(2, _ENDPOINT_DEPTH):
            if side == "left":
                lo, hi = 2.0 ** -(j + 1), 2.0 ** -j
            else:
                lo, hi = 1.0 - 2.0 ** -j, 1.0 - 2.0 ** -(j + 1)
            kn = [k for k in knots if lo < k < hi]
            block = integrate_with_knots(f, lo, hi, kn, quad)
            blocks.append(block)
            total += block
            if block <= floor:
                done = True
                break
        if not done:
            status = _classify_blocks(blocks, floor)
            if status is not CONVERGED:
                return total, status
    return total, CONVERGED


def unit_interval_integral(f, quad=DEFAULT_QUAD, knots=()):
    value, status = unit_interval_status(f, quad, knots)
    if status is not CONVERGED:
        raise DivergenceError(
            f"integral over (0,1) failed its endpoint refinement test ({status})",
            partial=value,
        )
    return value


def guarded_loglog(n):
    """log log n, guarded so that every n >= 2 (and even n >= 0) is valid.

    Evaluates ln(max(e, ln(max(e, n)))), which is 1 for n <= e^e and the
    plain iterated logarithm beyond.
    """
    n = float(n)
    return math.log(max(math.e, math.log(max(math.e, n))))


def trapezoid_weights(points):
    """Quadrature weights for int . dt over [points[0], points[-1]]."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 1 or points.size < 2:
        raise InputError("need at least two grid points")
    if np.any(np.diff(points) <= 0):
        raise InputError("grid points must be strictly increasing")
    w = np.empty_like(points)
    w[0] = 0.5 * (points[1] - points[0])
    w[-1] = 0.5 * (points[-1] - points[-2])
    w[1:-1] = 0.5 * (points[2:] - points[:-2])
    return w
