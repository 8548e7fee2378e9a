"""One-dimensional distribution machinery.

``SampleBatch`` and ``EmpiricalCDF`` hold observed data; ``DistributionSpec``
describes an analytic reference law through the handful of callables the rest
of the package needs:

* ``cdf``        F(t) = P(X <= t), right-continuous, vectorized
* ``quantile``   F^{-1}(u) = inf{x : F(x) >= u} (cadlag inverse)
* ``tail``       H(t) = P(|X| > t) for t >= 0
* ``tail_quantile``  Q(u) = inf{t >= 0 : H(t) <= u}

The pair (H, Q) satisfies u < H(t)  <=>  t < Q(u) at continuity points.

Specs may also carry ``quantile_integral`` I(u) = int_0^u F^{-1}(v) dv in
closed form; every builtin provides it, which gives exact O(n) evaluation of
the empirical-vs-analytic transport distance and of lower-tail averages.

Optional knot arrays advertise non-smooth points so quadrature can subdivide
there: ``knots`` (kinks/jumps of F on the x-axis), ``q_knots`` (u-levels where
F^{-1} jumps), ``tail_knots`` (t-values where H jumps), ``tail_q_knots``
(u-levels where Q jumps).
"""

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import InputError

_SQRT2PI = math.sqrt(2.0 * math.pi)
_UCLIP = 2.0 ** -53  # quantile arguments are clipped into [2^-53, 1 - 2^-53]


@dataclass(frozen=True)
class SampleBatch:
    """Finite real observations stored sorted ascending."""

    values: np.ndarray

    @classmethod
    def from_values(cls, values):
        arr = np.asarray(values)
        if arr.ndim != 1 or arr.size == 0:
            raise InputError("a sample batch needs at least one value")
        if arr.dtype == object:
            arr = np.array(sorted(arr), dtype=object)
        else:
            arr = np.sort(arr.astype(float, copy=True), kind="stable")
            if not np.all(np.isfinite(arr)):
                raise InputError("sample values must be finite")
        arr.flags.writeable = False
        return cls(arr)

    @property
    def n(self):
        return self.values.size

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.size == 0:
            raise InputError("a sample batch needs at least one value")


class EmpiricalCDF:
    """Right-continuous step CDF of a sample batch, F_n(t) = #{X_i <= t}/n."""

    def __init__(self, batch: SampleBatch):
        self.batch = batch

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.searchsorted(self.batch.values, t, side="right") / self.batch.n
        return out if out.ndim else float(out)

    def quantile(self, u):
        """Cadlag inverse: the ceil(n*u)-th order statistic."""
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.ceil(u * self.batch.n).astype(int) - 1, 0, self.batch.n - 1)
        out = self.batch.values[idx]
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class DistributionSpec:
    cdf: Callable
    quantile: Callable
    tail: Callable
    tail_quantile: Callable
    mean: float
    support_bound: float | None = None
    quantile_integral: Callable | None = None
    knots: np.ndarray | None = None
    q_knots: np.ndarray | None = None
    tail_knots: np.ndarray | None = None
    tail_q_knots: np.ndarray | None = None
    label: str = "custom"

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise InputError("reference distribution must have a finite mean")

    def clipped_quantile(self, u):
        """Quantile with u clipped away from {0, 1} for sampling."""
        return self.quantile(np.clip(u, _UCLIP, 1.0 - _UCLIP))


def _vec(f):
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        out = f(x)
        return out if out.ndim else float(out)

    return wrapped


def _tail_quantile_from_tail(tail, hi):
    """Numeric Q(u) = inf{t >= 0 : H(t) <= u} by bisection on [0, hi]."""

    def q_scalar(u):
        if tail(hi) > u:  # never drops below u on the bracket
            return math.inf
        lo_t, hi_t = 0.0, float(hi)
        if tail(0.0) <= u:
            return 0.0
        for _ in range(100):
            mid = 0.5 * (lo_t + hi_t)
            if tail(mid) <= u:
                hi_t = mid
            else:
                lo_t = mid
        return hi_t

    def q(u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            return q_scalar(float(u))
        return np.array([q_scalar(v) for v in u.ravel()]).reshape(u.shape)

    return q


def uniform(a=0.0, b=1.0):
    """Uniform law on [a, b]."""
    a, b = float(a), float(b)
    if not (b > a):
        raise InputError("uniform requires b > a")
    width = b - a

    cdf = _vec(lambda x: np.clip((x - a) / width, 0.0, 1.0))
    quantile = _vec(lambda u: a + np.clip(u, 0.0, 1.0) * width)
    q_integral = _vec(lambda u: a * np.clip(u, 0.0, 1.0) + 0.5 * width * np.clip(u, 0.0, 1.0) ** 2)

    def tail(t):
        t = np.asarray(t, dtype=float)
        t = np.maximum(t, 0.0)
        above = np.clip(b - np.maximum(a, t), 0.0, width)
        below = np.clip(np.minimum(b, -t) - a, 0.0, width)
        out = (above + below) / width
        return out if out.ndim else float(out)

    bound = max(abs(a), abs(b))
    # H is continuous piecewise linear with kinks at 0, |a|, |b|; invert by
    # linear interpolation on its knot values.
    kn = np.unique(np.clip(np.array([0.0, abs(a), abs(b), bound]), 0.0, bound))
    hv = np.array([float(tail(t)) for t in kn])

    def tail_quantile(u):
        u = np.asarray(u, dtype=float)
        out = np.interp(np.clip(u, 0.0, 1.0), hv[::-1], kn[::-1])
        out = np.where(u >= hv[0], 0.0, out)
        return out if out.ndim else float(out)

    return DistributionSpec(
        cdf=cdf,
        quantile=quantile,
        tail=tail,
        tail_quantile=tail_quantile,
        mean=0.5 * (a + b),
        support_bound=bound,
        quantile_integral=q_integral,
        knots=np.array([a, b]),
        label=f"uniform({a},{b})",
    )


def normal(mu=0.0, sigma=1.0):
    """Gaussian law N(mu, sigma^2)."""
    mu, sigma = float(mu), float(sigma)
    if sigma <= 0:
        raise InputError("normal requires sigma > 0")

    cdf = _vec(lambda x: ndtr((x - mu) / sigma))
    quantile = _vec(lambda u: mu + sigma * ndtri(np.clip(u, _UCLIP, 1.0 - _UCLIP)))

    def q_integral(u):
        # int_0^u F^{-1} = mu*u - sigma * phi(Phi^{-1}(u))
        u = np.asarray(u, dtype=float)
        z = ndtri(np.clip(u, _UCLIP, 1.0 - _UCLIP))
        phi = np.exp(-0.5 * z * z) / _SQRT2PI
        out = mu * u - sigma * np.where((u <= 0) | (u >= 1), 0.0, phi)
        return out if out.ndim else float(out)

    def tail(t):
        t = np.asarray(t, dtype=float)
        t = np.maximum(t, 0.0)
        out = ndtr(-(t - mu) / sigma) + ndtr((-t - mu) / sigma)
        return out if out.ndim else float(out)

    hi = abs(mu) + 40.0 * sigma
    return DistributionSpec(
        cdf=cdf,
        quantile=quantile,
        tail=tail,
        tail_quantile=_tail_quantile_from_tail(lambda t: float(tail(t)), hi),
        mean=mu,
        quantile_integral=q_integral,
        label=f"normal({mu},{sigma})",
    )


def point_mass(c=0.0):
    """Degenerate law concentrated at c."""
    c = float(c)
    cdf = _vec(lambda x: (x >= c).astype(float))
    quantile = _vec(lambda u: np.full_like(np.asarray(u, dtype=float), c))
    q_integral = _vec(lambda u: c * np.clip(u, 0.0, 1.0))
    ac = abs(c)

    def tail(t):
        t = np.asarray(t, dtype=float)
        out = (t < ac).astype(float)
        return out if out.ndim else float(out)

    def tail_quantile(u):
        u = np.asarray(u, dtype=float)
        out = np.where(u >= 1.0, 0.0, ac)
        return out if out.ndim else float(out)

    return DistributionSpec(
        cdf=cdf,
        quantile=quantile,
        tail=tail,
        tail_quantile=tail_quantile,
        mean=c,
        support_bound=ac,
        quantile_integral=q_integral,
        knots=np.array([c]),
        tail_knots=np.array([ac]),
        label=f"point_mass({c})",
    )


def discrete(values, probs):
    """Finitely supported law; duplicate atoms are merged."""
    values = np.asarray(values, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if values.shape != probs.shape or values.ndim != 1 or values.size == 0:
        raise InputError("values and probs must be matching nonempty 1-D arrays")
    if np.any(probs < 0) or not math.isclose(float(probs.sum()), 1.0, abs_tol=1e-9):
        raise InputError("probs must be nonnegative and sum to 1")
    order = np.argsort(values, kind="stable")
    values, probs = values[order], probs[order]
    # merge duplicates
    keep = np.concatenate([[True], np.diff(values) > 0])
    idx = np.cumsum(keep) - 1
    merged_p = np.zeros(int(idx[-1]) + 1)
    np.add.at(merged_p, idx, probs)
    v = values[keep]
    p = merged_p / merged_p.sum()
    cum = np.cumsum(p)
    cum[-1] = 1.0
    vp_cum = np.cumsum(v * p)
    mean = float(vp_cum[-1])

    def cdf(x):
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(v, x, side="right")
        out = np.where(i == 0, 0.0, cum[np.maximum(i - 1, 0)])
        return out if out.ndim else float(out)

    def quantile(u):
        u = np.asarray(u, dtype=float)
        i = np.clip(np.searchsorted(cum, np.clip(u, 0.0, 1.0), side="left"), 0, v.size - 1)
        out = v[i]
        return out if out.ndim else float(out)

    def q_integral(u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        i = np.clip(np.searchsorted(cum, u, side="left"), 0, v.size - 1)
        below = np.where(i == 0, 0.0, vp_cum[np.maximum(i - 1, 0)])
        base = np.where(i == 0, 0.0, cum[np.maximum(i - 1, 0)])
        out = below + v[i] * (u - base)
        return out if out.ndim else float(out)

    # tail machinery on |X|
    av = np.abs(v)
    aorder = np.argsort(av, kind="stable")
    av_sorted = av[aorder]
    ap = p[aorder]
    akeep = np.concatenate([[True], np.diff(av_sorted) > 0])
    aidx = np.cumsum(akeep) - 1
    ap_merged = np.zeros(int(aidx[-1]) + 1)
    np.add.at(ap_merged, aidx, ap)
    a_atoms = av_sorted[akeep]
    # H(a_atoms[i]) = P(|X| > a_atoms[i]) = suffix sum beyond i
    suffix = np.concatenate([np.cumsum(ap_merged[::-1])[::-1][1:], [0.0]])

    def tail(t):
        t = np.asarray(t, dtype=float)
        t = np.maximum(t, 0.0)
        i = np.searchsorted(a_atoms, t, side="right")
        # P(|X| > t): all atom mass with |v| > t; i == 0 means every atom is above t
        out = np.where(i == 0, 1.0, suffix[np.maximum(i - 1, 0)])
        return out if out.ndim else float(out)

    def tail_quantile(u):
        u = np.asarray(u, dtype=float)
        # smallest atom level a with H(a) <= u; 0 if H(0) <= u already
        j = suffix.size - np.searchsorted(suffix[::-1], u, side="right")
        j = np.clip(j, 0, a_atoms.size - 1)
        out = np.where(float(tail(0.0)) <= u, 0.0, a_atoms[j])
        return out if out.ndim else float(out)

    return DistributionSpec(
        cdf=cdf,
        quantile=quantile,
        tail=tail,
        tail_quantile=tail_quantile,
        mean=mean,
        support_bound=float(av.max()),
        quantile_integral=q_integral,
        knots=v,
        q_knots=cum[:-1].copy(),
        tail_knots=a_atoms,
        tail_q_knots=np.unique(suffix[suffix > 0]),
        label=f"discrete({v.size} atoms)",
    )


def from_batch(batch: SampleBatch):
    """Lift an empirical measure to a DistributionSpec (atoms of mass 1/n)."""
    vals = np.asarray(batch.values, dtype=float)
    return discrete(vals, np.full(batch.n, 1.0 / batch.n))


def lattice_convolution(innovation: DistributionSpec, weights, cells=20000):
    """Law of sum_j weights[j] * eps_j for i.i.d. innovations, discretized.

    Each scaled innovation is binned on a common lattice pitch and the
    component mass functions are convolved; the result is a ``discrete`` spec
    whose W1 distance to the true law is O(pitch).  Innovations must have
    (effectively) bounded support: the range is taken at the 1e-12 quantiles.
    """
    weights = np.asarray(weights, dtype=float)
    lo_e = float(innovation.quantile(1e-12))
    hi_e = float(innovation.quantile(1.0 - 1e-12))
    if not (math.isfinite(lo_e) and math.isfinite(hi_e)):
        raise InputError("innovation support too heavy-tailed to discretize")
    span = float(np.sum(np.abs(weights))) * max(hi_e - lo_e, 1e-12)
    h = span / cells if span > 0 else 1.0

    pmf = np.array([1.0])
    base = 0.0
    for w in weights:
        if w == 0.0:
            continue
        lo_c, hi_c = sorted((w * lo_e, w * hi_e))
        k0 = math.floor(lo_c / h)
        k1 = math.ceil(hi_c / h)
        edges = np.arange(k0, k1 + 1) * h  # lattice cell edges for w * eps
        eps_edges = edges / w  # ascending iff w > 0
        if w > 0:
            eps_edges[0], eps_edges[-1] = -np.inf, np.inf
            comp = np.diff(innovation.cdf(eps_edges))
        else:
            eps_edges[0], eps_edges[-1] = np.inf, -np.inf
            comp = -np.diff(innovation.cdf(eps_edges))
        comp = np.clip(comp, 0.0, None)
        comp /= comp.sum()
        pmf = np.convolve(pmf, comp)
        base += (k0 + 0.5) * h
    atoms = base + np.arange(pmf.size) * h
    mask = pmf > 1e-300
    return discrete(atoms[mask], pmf[mask] / pmf[mask].sum())


_MARGINAL_BUILDERS = {
    "uniform": lambda p: uniform(p.get("a", 0.0), p.get("b", 1.0)),
    "normal": lambda p: normal(p.get("mu", 0.0), p.get("sigma", 1.0)),
    "point_mass": lambda p: point_mass(p.get("c", 0.0)),
    "discrete": lambda p: discrete(p["values"], p["probs"]),
}


def marginal_from_spec(spec: dict) -> DistributionSpec:
    """Build a marginal from a JSON-friendly descriptor {"dist": ..., ...}."""
    if not isinstance(spec, dict) or "dist" not in spec:
        raise InputError("marginal descriptor must be a dict with a 'dist' key")
    name = spec["dist"]
    if name not in _MARGINAL_BUILDERS:
        raise InputError(f"unknown marginal '{name}' (have {sorted(_MARGINAL_BUILDERS)})")
    params = {k: v for k, v in spec.items() if k != "dist"}
    return _MARGINAL_BUILDERS[name](params)
