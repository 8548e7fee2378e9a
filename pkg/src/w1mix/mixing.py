"""Scalar functionals of a mixing profile (alpha, H, Q).

A :class:`MixingProfile` couples a certified nonincreasing upper-bound
sequence ``alpha(k) <= 1/4`` with the tail function H and tail quantile Q of
the marginal's absolute value.  Everything downstream is computed from these
three ingredients:

* ``gine_integral``        int_0^inf sqrt(H(t)) dt
* ``compute_V``            int_0^inf sqrt(sum_k min(alpha(k), H(t))) dt
* ``check_condition_2_2``  the same integral with a holds/diverges/undecided
                           verdict instead of an exception
* ``R_of`` / ``R_inverse`` R(u) = min{q >= 1 : alpha(q) <= u} * Q(u) and its
                           generalized inverse on [0, 1]
* ``rq_integral``          int_0^1 R(u) Q(u) du
* ``truncation_schedule``  the (m_n, v_n, M_n, q_n) clipping schedule with
                           m_n = a sqrt(n / loglog n)

The lag sum sum_k min(alpha(k), h) is evaluated exactly: alpha is
nonincreasing, so the first index with alpha(k) <= h splits the sum into a
count term h*k and a suffix sum of alpha, and declared decay certificates
close the suffix in closed form.  Profiles without a certificate (alpha
pinned at a positive constant beyond the stored head) make the sum infinite
for every h > 0, which surfaces as a divergence verdict rather than a silent
truncation.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import DistributionSpec
from .errors import DivergenceError, InputError, W1MixError
from .quadrature import (
    CONVERGED,
    DEFAULT_QUAD,
    DIVERGED,
    QuadratureConfig,
    guarded_loglog,
    integrate_with_knots,
    tail_integral_status,
    unit_interval_status,
)

FINITE = "finite"
GEOMETRIC = "geometric"
NONE = "none"

ALPHA_MAX = 0.25


@dataclass(frozen=True)
class MixingProfile:
    """Certified alpha upper bounds plus the marginal tail pair (H, Q).

    ``alpha_head[k]`` bounds alpha(k) for k < len(alpha_head); beyond the head
    the ``decay`` certificate applies:

    * ``("finite",)`` or the string "finite": alpha(k) = 0 past the head;
    * ``("geometric", r)``: alpha(k) <= alpha_head[-1] * r**(k - K);
    * ``("none",)``: no certificate -- alpha is only known to stay below
      alpha_head[-1], so lag sums over the tail are infinite.
    """

    alpha_head: np.ndarray
    decay: tuple
    tail: Callable
    tail_quantile: Callable
    tail_knots: np.ndarray | None = None
    tail_q_knots: np.ndarray | None = None

    @classmethod
    def from_marginal(cls, alpha_head, decay, marginal: DistributionSpec):
        return cls.build(alpha_head, decay, marginal.tail, marginal.tail_quantile,
                         marginal.tail_knots, marginal.tail_q_knots)

    @classmethod
    def build(cls, alpha_head, decay, tail, tail_quantile,
              tail_knots=None, tail_q_knots=None):
        head = np.asarray(alpha_head, dtype=float)
        if head.ndim != 1 or head.size == 0:
            raise InputError("alpha_head must be a nonempty 1-D array")
        if np.any(head < 0) or np.any(head > ALPHA_MAX + 1e-15):
            raise InputError("alpha values must lie in [0, 1/4]")
        if np.any(np.diff(head) > 1e-15):
            raise InputError("alpha_head must be nonincreasing")
        if isinstance(decay, str):
            decay = (decay,)
        kind = decay[0]
        if kind not in (FINITE, GEOMETRIC, NONE):
            raise InputError(f"unknown decay certificate {decay!r}")
        if kind == GEOMETRIC:
            rate = float(decay[1])
            if not 0.0 < rate < 1.0:
                raise InputError("geometric decay rate must be in (0, 1)")
            decay = (GEOMETRIC, rate)
        else:
            decay = (kind,)
        if head[-1] == 0.0:
            decay = (FINITE,)  # a zero tail value is the strongest certificate
        return cls(head, decay, tail, tail_quantile,
                   None if tail_knots is None else np.asarray(tail_knots, float),
                   None if tail_q_knots is None else np.asarray(tail_q_knots, float))

    # -- basic evaluations -------------------------------------------------

    def alpha(self, k):
        """Certified upper bound for alpha(k) (vectorized over k)."""
        k = np.asarray(k)
        head = self.alpha_head
        K = head.size - 1
        idx = np.clip(k, 0, K)
        out = head[idx].astype(float)
        beyond = k > K
        if np.any(beyond):
            if self.decay[0] == FINITE:
                out = np.where(beyond, 0.0, out)
            elif self.decay[0] == GEOMETRIC:
                out = np.where(beyond, head[K] * self.decay[1] ** (k - K), out)
            # NONE: stays at head[K]
        return out if out.ndim else float(out)

    @property
    def summable(self):
        return self.decay[0] != NONE

    def tail_cut(self, alpha_floor):
        """Smallest k with alpha(k) < alpha_floor (math.inf if never)."""
        if alpha_floor <= 0:
            return math.inf
        head = self.alpha_head
        below = np.nonzero(head < alpha_floor)[0]
        if below.size:
            return int(below[0])
        K = head.size - 1
        if self.decay[0] == FINITE:
            return K + 1
        if self.decay[0] == GEOMETRIC:
            r = self.decay[1]
            return K + max(1, math.ceil(math.log(alpha_floor / head[K]) / math.log(r)))
        return math.inf

    def first_alpha_leq(self, u, start=1):
        """min{k >= start : alpha(k) <= u}, or math.inf when the set is empty."""
        head = self.alpha_head
        K = head.size - 1
        if start <= K:
            seg = head[start:]
            cnt = int(np.searchsorted(-seg, -u, side="left"))  # entries > u
            if start + cnt <= K:
                return start + cnt
        if self.decay[0] == FINITE:
            return max(start, K + 1)
        if head[K] <= u:
            return max(start, K + 1)
        if self.decay[0] == GEOMETRIC:
            r = self.decay[1]
            j = max(1, math.ceil(math.log(u / head[K]) / math.log(r))) if u > 0 else math.inf
            if u == 0.0:
                return math.inf
            while head[K] * r ** j > u:  # guard against log roundoff
                j += 1
            return K + j
        return math.inf

    def lag_min_sum(self, h):
        """sum_{k>=0} min(alpha(k), h), exact; math.inf when not summable."""
        h = float(h)
        if h <= 0.0:
            return 0.0
        head = self.alpha_head
        K = head.size - 1
        if self.decay[0] == NONE and head[K] > 0:
            return math.inf
        suffix = self._suffix_sums()
        cnt = int(np.searchsorted(-head, -h, side="left"))  # entries > h
        if cnt <= K:
            return h * cnt + suffix[cnt]
        # every stored value exceeds h
        if self.decay[0] == FINITE:
            return h * (K + 1)
        r = self.decay[1]
        j = self.first_alpha_leq(h, start=K + 1) - K
        return h * (K + j) + head[K] * r**j / (1.0 - r)

    def _suffix_sums(self):
        cached = getattr(self, "_suffix_cache", None)
        if cached is None:
            head = self.alpha_head
            extra = 0.0
            if self.decay[0] == GEOMETRIC:
                r = self.decay[1]
                extra = head[-1] * r / (1.0 - r)
            cached = np.concatenate([np.cumsum(head[::-1])[::-1], [0.0]]) + extra
            cached[-1] = extra
            object.__setattr__(self, "_suffix_cache", cached)
        return cached

    def alpha_levels(self, limit=512, floor=1e-16):
        """Distinct alpha values, largest first, for quadrature knots."""
        vals = list(dict.fromkeys(self.alpha_head.tolist()))
        if self.decay[0] == GEOMETRIC:
            r = self.decay[1]
            v = self.alpha_head[-1]
            while len(vals) < limit and v * r > floor:
                v *= r
                vals.append(v)
        return np.array(vals)


def iid_profile(marginal: DistributionSpec, degenerate=False):
    """alpha = (1/4, 0, 0, ...) for i.i.d. draws; identically 0 if degenerate."""
    head = [0.0] if degenerate else [ALPHA_MAX, 0.0]
    return MixingProfile.from_marginal(head, FINITE, marginal)


# -- integrals over t ------------------------------------------------------


def gine_integral(H, quad=DEFAULT_QUAD):
    """int_0^inf sqrt(H(t)) dt for a nonincreasing tail function H.

    Declares divergence when the dyadic expansion of the upper limit fails
    its Cauchy test.
    """
    probe = [float(H(t)) for t in (0.0, 1.0, 7.3)]
    if any(p < -1e-12 or p > 1.0 + 1e-12 for p in probe):
        raise InputError("tail function must take values in [0, 1]")

    value, status = tail_integral_status(
        lambda t: math.sqrt(max(0.0, float(H(t)))), 0.0, quad
    )
    if status is not CONVERGED:
        raise DivergenceError(
            f"sqrt-tail integral did not converge ({status})", partial=value
        )
    return value


def _lag_sum_integrand(profile, quad):
    def f(t):
        s = profile.lag_min_sum(float(profile.tail(t)))
        if math.isinf(s):
            raise DivergenceError(
                "lag sum is infinite: alpha is not summable while H(t) > 0",
                partial=None,
            )
        return math.sqrt(s)

    return f


def _condition_value(profile: MixingProfile, quad: QuadratureConfig):
    """Shared engine for compute_V / check_condition_2_2."""
    f = _lag_sum_integrand(profile, quad)
    # knots: where H crosses each alpha level the integrand kinks, plus the
    # marginal's own jump points
    knots = [float(profile.tail_quantile(a)) for a in profile.alpha_levels(limit=64)]
    if profile.tail_knots is not None:
        knots.extend(float(t) for t in profile.tail_knots)
    knots = [k for k in knots if math.isfinite(k) and k > 0]

    sup = float(profile.tail_quantile(0.0))
    try:
        if math.isfinite(sup):  # bounded support: a finite interval suffices
            hi = max(sup, max(knots, default=0.0), 1e-12)
            return integrate_with_knots(f, 0.0, hi, knots, quad), CONVERGED
        return tail_integral_status(f, 0.0, quad, knots)
    except DivergenceError as exc:
        return exc.partial, DIVERGED


def compute_V(profile: MixingProfile, quad=DEFAULT_QUAD):
    """The mixing scale constant int_0^inf sqrt(sum_k alpha(k) ^ H(t)) dt.

    Conservative given that the profile stores upper bounds on alpha.
    Raises DivergenceError when the integral (or the inner lag sum) diverges.
    """
    value, status = _condition_value(profile, quad)
    if status is not CONVERGED:
        raise DivergenceError(
            f"mixing integral did not converge ({status})", partial=value
        )
    return value


@dataclass(frozen=True)
class ConditionCheck:
    status: str  # "holds" | "diverges" | "undecided"
    value: float | None
    detail: str = ""

    @property
    def holds(self):
        return self.status == "holds"


def check_condition_2_2(profile: MixingProfile, quad=DEFAULT_QUAD):
    """Convergence verdict for the square-root lag-sum integral."""
    value, status = _condition_value(profile, quad)
    if status is CONVERGED:
        return ConditionCheck("holds", value)
    if status is DIVERGED:
        return ConditionCheck(
            "diverges", value, "integrand failed the dyadic Cauchy test"
        )
    return ConditionCheck(
        "undecided", value, "refinement exhausted before the Cauchy test resolved"
    )


# -- R, its inverse, and the R*Q integral ----------------------------------


def R_of(u, profile: MixingProfile):
    """R(u) = min{q >= 1 : alpha(q) <= u} * Q(u).

    Returns math.inf when alpha never drops to u and no decay is declared
    (unless Q(u) = 0, which forces the product to 0).
    """
    u = float(u)
    if not 0.0 <= u <= 1.0:
        raise InputError("u must lie in [0, 1]")
    q = float(profile.tail_quantile(u))
    if q == 0.0:
        return 0.0
    count = profile.first_alpha_leq(u)
    if math.isinf(count):
        return math.inf
    return count * q


def R_inverse(x, profile: MixingProfile):
    """R^{-1}(x) = inf{u in [0, 1] : R(u) <= x} (1 if the set were empty).

    R is nonincreasing and right-continuous, so plain bisection brackets the
    infimum; the result is then snapped onto an exact alpha jump level when
    one lies in the final bracket, so that R(R^{-1}(x)) <= x holds exactly.
    """
    x = float(x)
    if x < 0:
        raise InputError("x must be nonnegative")
    if R_of(0.0, profile) <= x:
        return 0.0
    lo, hi = 0.0, 1.0  # invariant: R(lo) > x >= R(hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if R_of(mid, profile) <= x:
            hi = mid
        else:
            lo = mid
    for level in profile.alpha_levels(limit=4096, floor=max(lo * 0.5, 1e-300)):
        if lo < level <= hi and R_of(level, profile) <= x:
            return float(level)
    return hi


def rq_integral(profile: MixingProfile, quad=DEFAULT_QUAD):
    """int_0^1 R(u) Q(u) du with subdivision at the alpha jump levels."""

    def f(u):
        val = R_of(u, profile)
        if math.isinf(val):
            raise DivergenceError("R(u) unbounded on a set of positive measure")
        return val * float(profile.tail_quantile(u))

    knots = [float(a) for a in profile.alpha_levels(limit=512)]
    if profile.tail_q_knots is not None:
        knots.extend(float(v) for v in profile.tail_q_knots)
    knots = sorted({k for k in knots if 0.0 < k < 1.0})
    try:
        value, status = unit_interval_status(f, quad, knots)
    except DivergenceError as exc:
        raise DivergenceError(str(exc), partial=exc.partial) from None
    if status is not CONVERGED:
        raise DivergenceError(
            f"R*Q integral failed its endpoint refinement test ({status})",
            partial=value,
        )
    return value


# -- the clipping schedule --------------------------------------------------


@dataclass(frozen=True)
class TruncationSchedule:
    """The (m_n, v_n, M_n, q_n) clipping schedule at sample size n."""

    n: int
    a: float
    m_n: float
    v_n: float
    M_n: float
    q_n: int

    def clip(self, y):
        """The truncation map g(y) = (y ^ M_n) v (-M_n)."""
        return np.clip(y, -self.M_n, self.M_n)


def truncation_schedule(n, a, profile: MixingProfile):
    """Compute the schedule m_n = a sqrt(n/loglog n), v_n = R^{-1}(m_n),
    M_n = Q(v_n), q_n = min{k >= 1 : alpha(k) <= v_n} ^ n.

    The chain q_n * M_n = R(v_n) <= m_n is asserted (right continuity of R).
    """
    n = int(n)
    if n < 2:
        raise InputError("schedule needs n >= 2")
    if a <= 0:
        raise InputError("a must be positive")
    m_n = a * math.sqrt(n / guarded_loglog(n))
    v_n = R_inverse(m_n, profile)
    M_n = float(profile.tail_quantile(v_n))
    first = profile.first_alpha_leq(v_n)
    q_n = int(min(first, n))
    if math.isfinite(M_n) and q_n * M_n > m_n * (1.0 + 1e-9) + 1e-12:
        raise W1MixError(
            f"schedule invariant q_n*M_n <= m_n violated: {q_n}*{M_n} > {m_n}"
        )
    return TruncationSchedule(n=n, a=float(a), m_n=m_n, v_n=v_n, M_n=M_n, q_n=q_n)
