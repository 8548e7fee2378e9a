"""Two-sample machinery: the sign functional and the centered W1 statistic.

For jointly stationary pairs (X_i, Y_i) the natural comparison statistic is

    n * ( W1(mu_{n,X}, mu_{n,Y}) - W1(mu_X, mu_Y) ),

whose Gaussian limit is read through the continuous functional

    phi(x) = int ( sign(F_X - F_Y) x 1_{F_X != F_Y} + |x| 1_{F_X = F_Y} ) dt.

The measure-theoretic equality set {F_X = F_Y} is decided numerically with a
tolerance.  The limit covariance reuses the univariate kernel machinery on
the difference-indicator process 1_{X_k <= t} - 1_{Y_k <= t}.
"""

from dataclasses import dataclass

import numpy as np

from .distributions import DistributionSpec, SampleBatch
from .errors import InputError
from .gaussian import Grid
from .quadrature import DEFAULT_QUAD
from .wasserstein import quantile_w1, w1_empirical_vs_empirical

DEFAULT_EQ_TOL = 1e-9


@dataclass(frozen=True)
class BivariatePath:
    """An L1-discretized function: values on a grid, integrated with its weights."""

    grid: Grid
    x: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.x, dtype=float)
        if arr.shape != (self.grid.size,):
            raise InputError("path values must match the grid size")
        if not np.all(np.isfinite(arr)):
            raise InputError("path values must be finite")


def phi_functional(path: BivariatePath, F_X, F_Y, eq_tol=DEFAULT_EQ_TOL):
    """Grid quadrature of sign(F_X - F_Y) * x off the equality set, |x| on it."""
    t = path.grid.points
    d = np.asarray(F_X(t), dtype=float) - np.asarray(F_Y(t), dtype=float)
    x = np.asarray(path.x, dtype=float)
    equal = np.abs(d) <= eq_tol
    integrand = np.where(equal, np.abs(x), np.sign(d) * x)
    return float(path.grid.weights @ integrand)


def phi_on_rows(rows, grid: Grid, F_X, F_Y, eq_tol=DEFAULT_EQ_TOL):
    """Vectorized phi over a (draws x m) array of grid paths."""
    t = grid.points
    d = np.asarray(F_X(t), dtype=float) - np.asarray(F_Y(t), dtype=float)
    rows = np.asarray(rows, dtype=float)
    equal = np.abs(d) <= eq_tol
    integrand = np.where(equal[None, :], np.abs(rows), np.sign(d)[None, :] * rows)
    return integrand @ grid.weights


def bivariate_w1_statistic(
    x: SampleBatch,
    y: SampleBatch,
    mu_X: DistributionSpec,
    mu_Y: DistributionSpec,
    quad=DEFAULT_QUAD,
):
    """n * ( W1(empirical X, empirical Y) - W1(mu_X, mu_Y) ) for paired samples."""
    if not isinstance(x, SampleBatch):
        x = SampleBatch.from_values(x)
    if not isinstance(y, SampleBatch):
        y = SampleBatch.from_values(y)
    if x.n != y.n:
        raise InputError("paired samples must have equal sizes")
    knots = []
    for spec in (mu_X, mu_Y):
        if spec.q_knots is not None:
            knots.extend(float(k) for k in spec.q_knots)
    analytic = quantile_w1(mu_X.quantile, mu_Y.quantile, quad, sorted(set(knots)))
    empirical = w1_empirical_vs_empirical(x, y)
    return x.n * (float(empirical) - analytic)
