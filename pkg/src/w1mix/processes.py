"""Stationary sequence generators with certified mixing bounds.

Every model couples a sampler with an analytically known marginal and a
:class:`~w1mix.mixing.MixingProfile` whose alpha sequence is a certified
*upper bound* (never a claimed-exact value) for the model's true mixing
coefficients.  By convention alpha(0) = 1/4 for every nondegenerate model and
alpha is identically zero for constant processes.

Sampling is driven by counter-based Philox streams keyed through
``SeedSequence`` by (seed, stream ids...), so replicates are order-independent
and paths are bit-identical across runs and thread schedules.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

from .distributions import (
    DistributionSpec,
    discrete,
    lattice_convolution,
    marginal_from_spec,
    normal,
    point_mass,
    uniform,
)
from .errors import InputError
from .mixing import ALPHA_MAX, FINITE, GEOMETRIC, MixingProfile, iid_profile

_UCLIP = 2.0 ** -53


def stream(*key) -> np.random.Generator:
    """Philox generator keyed by a tuple of integers (order-independent use)."""
    flat = []
    for part in key:
        if isinstance(part, (tuple, list)):
            flat.extend(int(p) for p in part)
        else:
            flat.append(int(part))
    entropy = [abs(p) % (2**63) for p in flat] or [0]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class ProcessModel:
    """Immutable stationary model: marginal + mixing profile + sampler."""

    name: str
    params: dict
    marginal: DistributionSpec
    mixing: MixingProfile
    kind: str
    sampler: Callable = field(repr=False)
    extra: dict = field(default_factory=dict, repr=False)

    def sample(self, n, seed):
        """Deterministic stationary path of length n for the given seed.

        ``seed`` may be an int or a tuple of ints (e.g. (base, replicate)).
        """
        n = int(n)
        if n < 1:
            raise InputError("path length must be >= 1")
        rng = stream(seed) if not isinstance(seed, tuple) else stream(*seed)
        return self.sampler(rng, n)


def _is_degenerate(marginal: DistributionSpec):
    lo = float(marginal.quantile(1e-9))
    hi = float(marginal.quantile(1.0 - 1e-9))
    return hi - lo <= 0.0


def make_iid(marginal: DistributionSpec, name=None):
    """Independent draws by inverse-CDF from a counter-based stream."""
    degenerate = _is_degenerate(marginal)

    def sampler(rng, n):
        return np.asarray(marginal.clipped_quantile(rng.random(n)), dtype=float)

    return ProcessModel(
        name=name or f"iid[{marginal.label}]",
        params={"marginal": marginal.label},
        marginal=marginal,
        mixing=iid_profile(marginal, degenerate=degenerate),
        kind="iid",
        sampler=sampler,
    )


def make_constant(c=0.0):
    return make_iid(point_mass(c), name=f"constant[{c}]")


def make_gaussian_ar1(rho, transform_to: DistributionSpec | None = None, name=None):
    """X_k = rho X_{k-1} + sqrt(1-rho^2) eps_k from its stationary start.

    The declared sequence alpha(k) = min(1/4, |rho|^k) is a documented upper
    bound, not the exact coefficient.  With ``transform_to`` the output is the
    monotone marginal transform quantile(Phi(X_k)), which cannot increase any
    alpha(k), so the base profile is reused with the new marginal's tails.
    """
    rho = float(rho)
    if not abs(rho) < 1.0:
        raise InputError("ar(1) requires |rho| < 1")
    marginal = transform_to if transform_to is not None else normal()
    if abs(rho) == 0.0:
        return make_iid(marginal, name=name or "ar1[rho=0]")

    head_len = 64
    head = np.minimum(ALPHA_MAX, np.abs(rho) ** np.arange(head_len + 1))
    profile = MixingProfile.from_marginal(head, (GEOMETRIC, abs(rho)), marginal)
    scale = math.sqrt(1.0 - rho * rho)

    def sampler(rng, n):
        x0 = rng.standard_normal()
        eps = rng.standard_normal(n)
        path = lfilter([scale], [1.0, -rho], eps, zi=np.array([rho * x0]))[0]
        if transform_to is None:
            return path
        u = np.clip(ndtr(path), _UCLIP, 1.0 - _UCLIP)
        return np.asarray(transform_to.quantile(u), dtype=float)

    return ProcessModel(
        name=name or f"ar1[rho={rho},{marginal.label}]",
        params={"rho": rho, "marginal": marginal.label},
        marginal=marginal,
        mixing=profile,
        kind="ar1",
        sampler=sampler,
    )


def _dobrushin(P):
    """max over row pairs of the total-variation distance."""
    m = P.shape[0]
    worst = 0.0
    for i in range(m):
        for j in range(i + 1, m):
            worst = max(worst, 0.5 * float(np.abs(P[i] - P[j]).sum()))
    return worst


def _stationary_distribution(P):
    vals, vecs = np.linalg.eig(P.T)
    onish = np.argmin(np.abs(vals - 1.0))
    if abs(vals[onish] - 1.0) > 1e-8:
        raise InputError("transition matrix has no eigenvalue 1")
    pi = np.real(vecs[:, onish])
    pi = pi / pi.sum()
    if np.any(pi < -1e-12):
        raise InputError("stationary vector has mixed signs; chain not irreducible")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def make_finite_markov(transition, state_values, name=None):
    """Finite-state stationary Markov chain started from pi.

    alpha(k) is bounded by min(1/4, max_i TV(P^k_{i.}, pi)), computed from
    matrix powers with a running minimum; the declared geometric continuation
    rate comes from the Dobrushin contraction coefficient of P (or of a small
    power of P when delta(P) = 1).
    """
    P = np.asarray(transition, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise InputError("transition must be a square matrix")
    if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-10):
        raise InputError("transition rows must be probability vectors")
    m = P.shape[0]
    values = np.asarray(state_values, dtype=float)
    if values.shape != (m,):
        raise InputError("state_values length must match the number of states")

    # irreducible + aperiodic <=> eigenvalue 1 is simple and the only one on
    # the unit circle
    eigs = np.linalg.eigvals(P)
    mods = np.sort(np.abs(eigs))[::-1]
    if mods.size > 1 and mods[1] >= 1.0 - 1e-9:
        raise InputError("chain is reducible or periodic (second eigenvalue on the unit circle)")
    pi = _stationary_distribution(P)
    if np.any(pi <= 1e-14):
        raise InputError("stationary vector has a zero entry; chain not irreducible")

    # Dobrushin contraction; fall back to powers if delta(P) == 1
    rate, power = None, 1
    Q = P.copy()
    for power in (1, 2, 4, 8, 16):
        Q = np.linalg.matrix_power(P, power)
        d = _dobrushin(Q)
        if d < 1.0 - 1e-12:
            rate = max(1e-12, d ** (1.0 / power)) if d > 0 else 1e-12
            break
    if rate is None:
        raise InputError("spectral gap numerically zero; cannot certify mixing decay")

    # head of TV bounds; extended far enough that the geometric continuation's
    # block-power slack is numerically irrelevant
    head = [ALPHA_MAX]
    Pk = np.eye(m)
    bound = 1.0
    for _ in range(4096):
        Pk = Pk @ P
        tv = 0.5 * float(np.abs(Pk - pi[None, :]).sum(axis=1).max())
        if tv < 1e-14:  # roundoff floor of the power iteration
            tv = 0.0
        bound = min(bound, tv, head[-1])
        head.append(min(ALPHA_MAX, bound))
        if bound <= 1e-45:
            break
    decay = (FINITE,) if head[-1] == 0.0 else (GEOMETRIC, rate)

    marginal = discrete(values, pi)
    profile = MixingProfile.from_marginal(np.array(head), decay, marginal)

    order = np.argsort(values, kind="stable")
    cum_rows = [tuple(np.cumsum(P[i])[:-1]) + (1.0,) for i in range(m)]
    pi_cum = tuple(np.cumsum(pi)[:-1]) + (1.0,)
    values_arr = values.copy()

    def sampler(rng, n):
        u = rng.random(n).tolist()
        states = np.empty(n, dtype=np.intp)
        s = bisect_right(pi_cum, u[0])
        states[0] = s
        for k in range(1, n):
            s = bisect_right(cum_rows[s], u[k])
            states[k] = s
        return values_arr[states]

    return ProcessModel(
        name=name or f"markov[{m} states]",
        params={"transition": P.tolist(), "state_values": values.tolist()},
        marginal=marginal,
        mixing=profile,
        kind="markov",
        sampler=sampler,
        extra={"transition": P, "pi": pi, "state_values": values, "order": order},
    )


def make_m_dependent(m, weights, innovation: DistributionSpec, name=None):
    """Moving average X_k = sum_j weights[j] * eps_{k-j} of i.i.d. innovations.

    alpha(k) = 1/4 for k <= m and 0 beyond (m-dependence).  The marginal is
    the innovation itself when the filter is trivial, otherwise a lattice
    convolution of the scaled innovation laws.
    """
    m = int(m)
    w = np.asarray(weights, dtype=float)
    if m < 0 or w.shape != (m + 1,):
        raise InputError("weights must have length m + 1")
    if m == 0 and w[0] == 1.0:
        marginal = innovation
    else:
        marginal = lattice_convolution(innovation, w)
    head = np.concatenate([np.full(m + 1, ALPHA_MAX), [0.0]])
    profile = MixingProfile.from_marginal(head, FINITE, marginal)

    def sampler(rng, n):
        u = rng.random(n + m)
        eps = np.asarray(innovation.clipped_quantile(u), dtype=float)
        return np.convolve(eps, w, mode="valid")

    return ProcessModel(
        name=name or f"ma[{m}-dependent]",
        params={"m": m, "weights": w.tolist(), "innovation": innovation.label},
        marginal=marginal,
        mixing=profile,
        kind="m_dependent",
        sampler=sampler,
    )


# -- JSON descriptors --------------------------------------------------------


def model_from_spec(spec: dict) -> ProcessModel:
    """Build a model from a JSON-friendly descriptor {"name": ..., "params": {...}}."""
    if not isinstance(spec, dict) or "name" not in spec:
        raise InputError("model descriptor must be a dict with a 'name' key")
    name = spec["name"]
    p = spec.get("params", {}) or {}
    if name == "iid":
        return make_iid(marginal_from_spec(p["marginal"]))
    if name == "iid_uniform":
        return make_iid(uniform(p.get("a", 0.0), p.get("b", 1.0)))
    if name == "iid_normal":
        return make_iid(normal(p.get("mu", 0.0), p.get("sigma", 1.0)))
    if name == "constant":
        return make_constant(p.get("c", 0.0))
    if name == "ar1":
        transform = p.get("transform_to")
        return make_gaussian_ar1(
            p["rho"], None if transform is None else marginal_from_spec(transform)
        )
    if name == "markov":
        return make_finite_markov(p["transition"], p["state_values"])
    if name == "m_dependent":
        return make_m_dependent(p["m"], p["weights"], marginal_from_spec(p["innovation"]))
    raise InputError(f"unknown model '{name}'")
