"""Conditional Value at Risk (expected shortfall) of the lower tail.

    CVaR_u(X) = -(1/u) int_0^u F_X^{-1}(x) dx,  u in (0, 1],

with losses in the lower tail (the minus-sign convention; the upper-tail
variant is deliberately not offered).  The empirical estimator replaces the
quantile by its empirical counterpart, the error bound comes from the
elementary transport inequality

    |CVaR_u(X) - CVaR_u(Y)| <= W1(mu_X, mu_Y) / u,

and the rate annotation evaluates the asymptotic almost-sure envelope
(kappa_upper / u) * sqrt(2 loglog n / n) at finite n.  The annotation is an
asymptotic envelope only: it carries no finite-n guarantee.
"""

import math
from dataclasses import dataclass

import numpy as np

from .distributions import DistributionSpec, SampleBatch
from .errors import DivergenceError, InputError
from .gaussian import CovarianceKernel, kappa_bounds
from .quadrature import DEFAULT_QUAD, guarded_loglog, integrate_with_knots
from .wasserstein import w1_empirical_vs_cdf

RATE_CAVEAT = "asymptotic envelope; no finite-n guarantee"


def _check_u(u):
    u = float(u)
    if not 0.0 < u <= 1.0:
        raise InputError("the level u must lie in (0, 1]")
    return u


def cvar_exact(marginal: DistributionSpec, u, quad=DEFAULT_QUAD):
    """Exact CVaR of an analytic law; closed form when the spec carries the
    quantile antiderivative, singularity-aware quadrature otherwise."""
    u = _check_u(u)
    if marginal.quantile_integral is not None:
        return -float(marginal.quantile_integral(u)) / u

    # quadrature toward the (possibly singular) lower endpoint
    total = 0.0
    hi = u
    blocks = []
    for j in range(2, 50):
        lo = u * 2.0**-j
        knots = marginal.q_knots if marginal.q_knots is not None else ()
        block = integrate_with_knots(
            lambda x: float(marginal.quantile(x)), lo, hi,
            [k for k in np.atleast_1d(knots) if lo < k < hi], quad,
        )
        blocks.append(abs(block))
        total += block
        hi = lo
        if abs(block) <= quad.abs_tol / 8.0:
            return -total / u
    if len(blocks) >= 2 and blocks[-1] >= 0.95 * blocks[-2]:
        raise DivergenceError("lower-tail quantile integral diverges", partial=-total / u)
    return -total / u


def cvar_empirical(samples: SampleBatch, u):
    """The plug-in estimator -(1/u) int_0^u F_n^{-1}, evaluated exactly.

    With k = floor(n u):  -(1/u) [ (1/n) sum_{i<=k} X_(i) + (u - k/n) X_(k+1) ],
    the fractional term absent when n u is an integer.
    """
    if not isinstance(samples, SampleBatch):
        samples = SampleBatch.from_values(samples)
    u = _check_u(u)
    x = np.asarray(samples.values, dtype=float)
    n = x.size
    nu = n * u
    k = int(math.floor(nu + 1e-12))
    k = min(k, n)
    acc = float(x[:k].sum()) / n
    frac = u - k / n
    if frac > 1e-12 and k < n:
        acc += frac * float(x[k])
    return -acc / u


def cvar_error_bound(samples: SampleBatch, marginal: DistributionSpec, u,
                     quad=DEFAULT_QUAD):
    """The transport bound W1(empirical, marginal) / u, which dominates the
    actual estimation error pathwise."""
    u = _check_u(u)
    return w1_empirical_vs_cdf(samples, marginal, quad) / u


def cvar_rate_annotation(kernel: CovarianceKernel, u, n, draws=20000, seed=0):
    """The almost-sure envelope (kappa_upper / u) sqrt(2 loglog n / n) at n.

    Labeled asymptotic: the underlying statement is a limsup bound.
    """
    u = _check_u(u)
    n = int(n)
    if n < 2:
        raise InputError("n must be >= 2")
    bracket = kappa_bounds(kernel, draws, seed)
    return (bracket.upper / u) * math.sqrt(2.0 * guarded_loglog(n) / n)


@dataclass(frozen=True)
class CVaRReport:
    """Estimator output plus its transport bound and rate annotation."""

    u: float
    estimate: float
    w1_bound: float | None = None
    rate_annotation: dict | None = None

    def to_dict(self):
        out = {"u": self.u, "estimate": self.estimate, "w1_bound": self.w1_bound}
        out["rate_annotation"] = self.rate_annotation
        return out


def cvar_report(samples: SampleBatch, u, marginal: DistributionSpec | None = None,
                kernel: CovarianceKernel | None = None, n_for_rate=None,
                draws=20000, seed=0, quad=DEFAULT_QUAD):
    """Assemble a CVaRReport; the bound and annotation are filled when the
    reference marginal / kernel are available."""
    if not isinstance(samples, SampleBatch):
        samples = SampleBatch.from_values(samples)
    u = _check_u(u)
    estimate = cvar_empirical(samples, u)
    bound = None
    if marginal is not None:
        bound = cvar_error_bound(samples, marginal, u, quad)
    annotation = None
    if kernel is not None:
        n = int(n_for_rate if n_for_rate is not None else samples.n)
        bracket = kappa_bounds(kernel, draws, seed)
        norm = math.sqrt(2.0 * guarded_loglog(n) / n)
        annotation = {
            "kappa_upper": bracket.upper,
            "normalization": norm,
            "envelope": bracket.upper / u * norm,
            "note": RATE_CAVEAT,
        }
    return CVaRReport(u=u, estimate=estimate, w1_bound=bound,
                      rate_annotation=annotation)
