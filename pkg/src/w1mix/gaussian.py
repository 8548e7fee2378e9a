"""Long-run covariance kernels of the indicator process and the Gaussian limit.

The limiting object behind the scaled empirical transport distance is an
L1-valued centered Gaussian Z whose covariance kernel on the grid is

    K(t, s) = sum_{k in Z} Cov(1_{X_0 <= t}, 1_{X_k <= s}).

Three constructors build K: the exact independent-case formula
F(min(t,s)) - F(t)F(s), an exact matrix-power series for finite Markov
chains, and a Bartlett lag-window estimator from a simulated path (PSD by
construction since triangular weights make it a Gram matrix of sliding-window
sums).  On top of the kernel sit the Gaussian sampler, the distribution of
int |Z(t)| dt, and a (lower, upper) bracket for the envelope constant

    kappa = sup_{||f||_inf <= 1} sqrt(Var int f(t) Z(t) dt) <= || int |Z| dt ||_2.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DistributionSpec
from .errors import IndefiniteKernelError, InputError
from .processes import ProcessModel, stream
from .quadrature import trapezoid_weights

DEFAULT_GRID_SIZE = 512
DEFAULT_TAIL_EPS = 1e-4


@dataclass(frozen=True)
class Grid:
    """Strictly increasing evaluation points with int . dt trapezoid weights."""

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def regular(cls, lo, hi, size=DEFAULT_GRID_SIZE):
        if not (hi > lo):
            raise InputError("grid needs hi > lo")
        pts = np.linspace(float(lo), float(hi), int(size))
        return cls(points=pts, weights=trapezoid_weights(pts))

    @classmethod
    def for_marginal(cls, marginal: DistributionSpec, size=DEFAULT_GRID_SIZE,
                     tail_eps=DEFAULT_TAIL_EPS):
        """Equispaced grid over the central quantile range of the marginal.

        Mass beyond the tail_eps quantiles is a documented truncation of the
        dt-integral; it is negligible for square-root-integrable tails.
        """
        lo = float(marginal.quantile(tail_eps))
        hi = float(marginal.quantile(1.0 - tail_eps))
        if hi - lo < 1e-12:  # degenerate marginal: any window works, K = 0
            lo, hi = lo - 1.0, hi + 1.0
        return cls.regular(lo, hi, size)

    @property
    def size(self):
        return self.points.size


@dataclass
class CovarianceKernel:
    """Symmetric PSD(-after-repair) kernel matrix on a grid."""

    grid: Grid
    matrix: np.ndarray
    psd_repair: dict = field(default_factory=dict)
    _factor: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        K = np.asarray(self.matrix, dtype=float)
        if K.shape != (self.grid.size, self.grid.size):
            raise InputError("kernel matrix shape must match the grid")
        if not np.allclose(K, K.T, atol=1e-10 * max(1.0, float(np.abs(K).max()))):
            raise InputError("kernel matrix must be symmetric")
        self.matrix = 0.5 * (K + K.T)

    def factor(self):
        """Cholesky-like factor L with L L^T = repaired kernel (eigen route).

        Eigenvalues below -m * eps * ||K|| are a hard error; tiny negatives
        are clipped to 0 and the clipped mass is logged in ``psd_repair``.
        """
        if self._factor is None:
            vals, vecs = np.linalg.eigh(self.matrix)
            scale = float(np.abs(vals).max()) if vals.size else 0.0
            floor = -self.grid.size * np.finfo(float).eps * max(scale, 1e-300)
            worst = float(vals.min()) if vals.size else 0.0
            if worst < floor:
                raise IndefiniteKernelError(
                    f"kernel is materially indefinite (eigenvalue {worst:.3e})",
                    worst_eigenvalue=worst,
                )
            clipped = np.clip(vals, 0.0, None)
            self.psd_repair = {
                "clipped_mass": float(np.abs(vals[vals < 0]).sum()),
                "min_eigenvalue": worst,
                "trace": float(clipped.sum()),
            }
            self._factor = vecs * np.sqrt(clipped)[None, :]
        return self._factor

    def diag_std(self):
        return np.sqrt(np.clip(np.diag(self.matrix), 0.0, None))


def exact_kernel_iid(marginal: DistributionSpec, grid: Grid):
    """Independent case: K(t, s) = F(min(t, s)) - F(t) F(s), exact."""
    F = np.asarray(marginal.cdf(grid.points), dtype=float)
    K = np.minimum.outer(F, F) - np.outer(F, F)
    return CovarianceKernel(grid=grid, matrix=K)


def exact_kernel_markov(model: ProcessModel, grid: Grid, tail_tol=1e-12):
    """Two-sided lag series of indicator covariances for a finite chain.

    Cov(1_{X_0 <= t}, 1_{X_k <= s}) comes exactly from pi and P^k; negative
    lags are the transposes by stationarity.  The series is cut once the
    Dobrushin contraction certificate bounds the remainder below tail_tol.
    """
    if model.kind != "markov":
        raise InputError("exact_kernel_markov needs a finite Markov model")
    P = model.extra["transition"]
    pi = model.extra["pi"]
    values = model.extra["state_values"]
    A = (values[:, None] <= grid.points[None, :]).astype(float)  # states x grid
    F = pi @ A
    piA = pi[:, None] * A

    d = 1.0
    for power in (1, 2, 4, 8, 16):
        Q = np.linalg.matrix_power(P, power)
        d0 = max(
            0.5 * float(np.abs(Q[i] - Q[j]).sum())
            for i in range(P.shape[0])
            for j in range(i + 1, P.shape[0])
        )
        if d0 < 1.0 - 1e-12:
            d = d0 ** (1.0 / power)
            break
    else:
        raise InputError("spectral gap numerically zero; series cannot be cut")

    K = A.T @ piA - np.outer(F, F)  # lag 0
    Pk = np.eye(P.shape[0])
    for _ in range(200000):
        Pk = Pk @ P
        Ck = A.T @ (pi[:, None] * (Pk @ A)) - np.outer(F, F)
        K += Ck + Ck.T
        term = float(np.abs(Ck).max())
        if term * d / max(1e-300, 1.0 - d) < tail_tol and term < tail_tol:
            break
    else:
        raise InputError("lag series did not reach its tolerance")
    return CovarianceKernel(grid=grid, matrix=0.5 * (K + K.T))


def bartlett_indicator_kernel(paths, mean_row, grid: Grid, bandwidth, chunk=24576):
    """Bartlett lag-window kernel of a signed-indicator process.

    ``paths`` is a sequence of (sign, path) pairs defining the centered rows

        Y_k(t_i) = sum_s sign_s * 1{path_s[k] <= t_i} - mean_row[i],

    with ``mean_row`` the true stationary mean of the indicator combination.
    Implements (1/(n(L+1))) * sum_j S_j S_j^T over all window sums
    S_j = sum_{k=j}^{j+L} Y_k (windows clipped to [0, n)), which equals the
    triangular-weight lag-window estimator
    sum_{|l| <= L} (1 - |l|/(L+1)) C_l with C_l = (1/n) sum_k Y_k Y_{k+l}^T,
    and is PSD by construction (a Gram matrix).

    The window sums are integer counts, so the heavy work is int32 cumulative
    sums plus one float32 Gram product per block (accumulated in float64);
    the float32 rounding is ~1e-5 of the Monte Carlo noise floor.
    """
    L = int(bandwidth)
    n = int(len(paths[0][1]))
    m = grid.size
    if L < 1 or n < 10 * L:
        raise InputError("need n >= 10 * bandwidth >= 10")
    if any(len(p) != n for _, p in paths):
        raise InputError("all paths must have equal length")
    pts = grid.points
    mean32 = np.asarray(mean_row, dtype=np.float32)
    G = np.zeros((m, m))
    js = np.arange(-L, n)  # window start indices
    for a in range(0, js.size, chunk):
        block = js[a : a + chunk]
        k_lo = max(0, int(block[0]))
        k_hi = min(n - 1, int(block[-1]) + L)
        hi_idx = np.minimum(n - 1, block + L) + 1 - k_lo
        lo_idx = np.maximum(0, block) - k_lo
        N = None
        for sign, path in paths:
            ind = path[k_lo : k_hi + 1, None] <= pts[None, :]
            Cn = np.vstack(
                [np.zeros((1, m), dtype=np.int32), np.cumsum(ind, axis=0, dtype=np.int32)]
            )
            Ns = Cn[hi_idx] - Cn[lo_idx]
            N = (sign * Ns) if N is None else N + sign * Ns
        S = N.astype(np.float32)
        S -= (hi_idx - lo_idx).astype(np.float32)[:, None] * mean32[None, :]
        G += (S.T @ S).astype(np.float64)
    K = G / (n * (L + 1.0))
    return CovarianceKernel(grid=grid, matrix=0.5 * (K + K.T))


def estimate_kernel_mc(model: ProcessModel, grid: Grid, n, bandwidth, seed,
                       chunk=24576):
    """Monte Carlo kernel estimate from one simulated path of length n.

    Rows are centered by the model's true marginal CDF (the indicator process
    has known mean here), and the Bartlett window keeps the result PSD.
    """
    n = int(n)
    path = model.sample(n, seed)
    F = np.asarray(model.marginal.cdf(grid.points), dtype=float)
    return bartlett_indicator_kernel([(1, path)], F, grid, bandwidth, chunk)


def default_bandwidth(n):
    return max(1, math.ceil(float(n) ** (1.0 / 3.0)))


# -- Gaussian simulation ------------------------------------------------------


def simulate_Z(kernel: CovarianceKernel, draws, seed):
    """i.i.d. centered Gaussian grid paths with the kernel's covariance."""
    draws = int(draws)
    if draws < 1:
        raise InputError("draws must be >= 1")
    Lf = kernel.factor()
    rng = stream(seed) if not isinstance(seed, tuple) else stream(*seed)
    xi = rng.standard_normal((Lf.shape[1], draws))
    return (Lf @ xi).T


@dataclass(frozen=True)
class L1NormSample:
    """Empirical sample of int |Z(t)| dt with summary quantiles."""

    values: np.ndarray
    quantiles: dict

    @property
    def mean(self):
        return float(self.values.mean())


_SUMMARY_QS = (0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99)


def l1_norm_distribution(kernel: CovarianceKernel, draws, seed, chunk=16384):
    """Sample of the integrated absolute path, int |Z(t)| dt (grid quadrature)."""
    draws = int(draws)
    if draws < 1:
        raise InputError("draws must be >= 1")
    Lf = kernel.factor()
    w = kernel.grid.weights
    rng = stream(seed) if not isinstance(seed, tuple) else stream(*seed)
    out = np.empty(draws)
    done = 0
    while done < draws:
        c = min(chunk, draws - done)
        xi = rng.standard_normal((Lf.shape[1], c))
        out[done : done + c] = w @ np.abs(Lf @ xi)
        done += c
    qs = {f"p{int(q * 100):02d}": float(np.quantile(out, q)) for q in _SUMMARY_QS}
    return L1NormSample(values=out, quantiles=qs)


@dataclass(frozen=True)
class KappaBracket:
    """(lower, upper) bracket for the envelope constant, with the MC standard
    error of the upper estimate."""

    lower: float
    upper: float
    upper_se: float

    def __iter__(self):
        return iter((self.lower, self.upper))


def kappa_bounds(kernel: CovarianceKernel, draws, seed, sign_probes=256):
    """Bracket sup_{||f||_inf <= 1} sqrt(Var int f Z dt).

    Upper: Monte Carlo estimate of || int |Z| dt ||_2 (the classical
    majorant), with a delta-method standard error.  Lower: best candidate
    sqrt(f^T W K W f) over sign vectors -- the all-ones vector, the sign
    patterns of the leading eigenvectors, and random sign probes.  Exact sign
    maximization is combinatorial; the bracket is reported instead.
    """
    sample = l1_norm_distribution(kernel, draws, seed)
    second = float(np.mean(sample.values**2))
    upper = math.sqrt(second)
    var_second = float(np.var(sample.values**2, ddof=1)) / sample.values.size
    upper_se = math.sqrt(var_second) / (2.0 * upper) if upper > 0 else 0.0

    W = kernel.grid.weights
    K = kernel.matrix
    WKW = (W[:, None] * K) * W[None, :]

    def quad_form(f):
        return float(f @ WKW @ f)

    m = kernel.grid.size
    best = quad_form(np.ones(m))
    vals, vecs = np.linalg.eigh(K)
    for j in range(1, min(17, m + 1)):
        f = np.sign(vecs[:, -j])
        f[f == 0] = 1.0
        best = max(best, quad_form(f))
    rng = stream(seed, 977) if not isinstance(seed, tuple) else stream(*seed, 977)
    for _ in range(int(sign_probes)):
        f = rng.integers(0, 2, size=m) * 2.0 - 1.0
        best = max(best, quad_form(f))
    lower = math.sqrt(max(0.0, best))
    return KappaBracket(lower=lower, upper=upper, upper_se=upper_se)
