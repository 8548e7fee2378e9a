"""Seeded Monte Carlo experiments and their CSV/JSON artifacts.

Each experiment maps replicate indices to scalar statistics through pure
functions of (config, replicate), with per-replicate counter-based RNG
streams, so results are byte-identical regardless of the thread count.
Replicate rows are merged in index order; floats are serialized with repr
(shortest round-trip) to keep the CSV stable.

Experiments:

* ``clt``   -- distribution of sqrt(n) W1(empirical, marginal) against the
               integrated-absolute-Gaussian limit sample (two-sample KS).
* ``lil``   -- trajectories of sqrt(k) W1 / sqrt(2 loglog k) along a geometric
               prefix grid, with running maxima compared to the kappa bracket.
* ``prop1`` -- the prefix max statistic max_{k<=n} k W1 / (V sqrt(n loglog n)).
* ``cvar``  -- CVaR estimation error against its transport bound (hard
               inequality) and the asymptotic envelope.
* ``bivariate`` -- the centered two-sample statistic against the sign
               functional of the difference-indicator Gaussian limit.

The geometric prefix grid (k = ceil(1.2^j)) keeps total prefix-W1 cost
O(n log n); running maxima over it are documented lower bounds of the true
running maxima.
"""

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.stats import ks_2samp

from .bivariate import phi_on_rows
from .cvar import cvar_empirical, cvar_exact
from .distributions import SampleBatch
from .errors import InputError, PreconditionError, W1MixError
from .gaussian import (
    CovarianceKernel,
    Grid,
    bartlett_indicator_kernel,
    default_bandwidth,
    estimate_kernel_mc,
    exact_kernel_iid,
    exact_kernel_markov,
    kappa_bounds,
    l1_norm_distribution,
    simulate_Z,
)
from .mixing import check_condition_2_2, compute_V
from .processes import ProcessModel, model_from_spec
from .quadrature import DEFAULT_QUAD, guarded_loglog
from .wasserstein import (
    prefix_w1_on_grid,
    quantile_w1,
    w1_empirical_vs_cdf,
    w1_empirical_vs_empirical,
)

EXPERIMENTS = ("clt", "lil", "prop1", "cvar", "bivariate")

# stream id tags so that every consumer of randomness is keyed apart
_TAG_PATH = 1
_TAG_LIMIT = 2
_TAG_KAPPA = 3
_TAG_PAIR = 4
_TAG_KERNEL = 5

_DEFAULT_N_GRID = [1000, 10000, 100000]


@dataclass
class ExperimentConfig:
    experiment: str
    model: dict
    replicates: int = 100
    seed: int = 0
    n: int | None = None
    n_grid: list | None = None
    model2: dict | None = None
    grid_size: int = 512
    bandwidth: int | None = None
    u: float = 0.5
    limit_draws: int = 100000
    kernel_n: int | None = None
    ks_level: float = 0.001
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise InputError(f"experiment must be one of {EXPERIMENTS}")
        if self.replicates < 1:
            raise InputError("replicates must be >= 1")
        if self.n is not None and self.n < 2:
            raise InputError("n must be >= 2")
        if self.n_grid is not None:
            self.n_grid = [int(v) for v in self.n_grid]
            if any(v < 2 for v in self.n_grid) or sorted(self.n_grid) != self.n_grid:
                raise InputError("n_grid must be ascending with entries >= 2")
        if not 0.0 < self.u <= 1.0:
            raise InputError("u must lie in (0, 1]")
        if self.threads < 1:
            raise InputError("threads must be >= 1")

    @classmethod
    def from_dict(cls, d: dict):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config fields: {sorted(unknown)}")
        if "experiment" not in d or "model" not in d:
            raise InputError("config needs 'experiment' and 'model'")
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self):
        return hashlib.sha1(self.canonical_json().encode()).hexdigest()[:12]

    def effective_n(self):
        if self.n is not None:
            return int(self.n)
        if self.n_grid:
            return int(self.n_grid[-1])
        return 10000

    def effective_n_grid(self):
        if self.n_grid:
            return list(self.n_grid)
        if self.n is not None:
            return [int(self.n)]
        return list(_DEFAULT_N_GRID)

    def effective_bandwidth(self, n):
        return int(self.bandwidth) if self.bandwidth is not None else default_bandwidth(n)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    header: list
    rows: list
    summary: dict


def _map_replicates(fn, replicates, threads):
    if threads <= 1:
        return [fn(r) for r in range(replicates)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(replicates)))


def geometric_grid(n, ratio=1.2, k_min=2):
    """Unique ceil(ratio^j) values in [k_min, n], with n appended."""
    ks = set()
    j = 0
    while True:
        k = math.ceil(ratio**j)
        j += 1
        if k > n:
            break
        if k >= k_min:
            ks.add(k)
    ks.add(int(n))
    return np.array(sorted(ks), dtype=int)


def _require_condition(model: ProcessModel):
    verdict = check_condition_2_2(model.mixing, DEFAULT_QUAD)
    if not verdict.holds:
        raise PreconditionError(
            f"mixing condition does not hold for {model.name}: "
            f"{verdict.status} ({verdict.detail})"
        )
    return verdict.value


def limit_kernel(model: ProcessModel, config: ExperimentConfig) -> CovarianceKernel:
    """Exact kernel when the model admits one, Bartlett estimate otherwise."""
    grid = Grid.for_marginal(model.marginal, config.grid_size)
    if model.kind == "iid":
        return exact_kernel_iid(model.marginal, grid)
    if model.kind == "markov":
        return exact_kernel_markov(model, grid)
    n_k = int(config.kernel_n) if config.kernel_n is not None else max(
        200000, config.effective_n()
    )
    bw = config.effective_bandwidth(n_k)
    return estimate_kernel_mc(model, grid, n_k, bw, (config.seed, _TAG_KERNEL))


def _meta(config: ExperimentConfig, model: ProcessModel):
    return (config.config_hash, model.name)


# -- clt ----------------------------------------------------------------------


def run_clt(config: ExperimentConfig) -> ExperimentResult:
    model = model_from_spec(config.model)
    _require_condition(model)
    n = config.effective_n()
    sqrt_n = math.sqrt(n)

    def one(r):
        path = model.sample(n, (config.seed, _TAG_PATH, r))
        return sqrt_n * w1_empirical_vs_cdf(SampleBatch.from_values(path), model.marginal)

    stats = _map_replicates(one, config.replicates, config.threads)
    kernel = limit_kernel(model, config)
    limit = l1_norm_distribution(kernel, config.limit_draws, (config.seed, _TAG_LIMIT))
    ks = ks_2samp(stats, limit.values)
    meta = _meta(config, model)
    rows = [meta + (r, n, s) for r, s in enumerate(stats)]
    summary = {
        "experiment": "clt",
        "config_hash": config.config_hash,
        "model": model.name,
        "n": n,
        "replicates": config.replicates,
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "ks_level": config.ks_level,
        "verdict": "pass" if ks.pvalue > config.ks_level else "fail",
        "mean_statistic": float(np.mean(stats)),
        "limit_mean": limit.mean,
        "limit_quantiles": limit.quantiles,
    }
    return ExperimentResult(config, ["config_hash", "model", "replicate", "n", "sqrt_n_w1"],
                            rows, summary)


# -- lil ------------------------------------------------------------------------


def run_lil(config: ExperimentConfig) -> ExperimentResult:
    model = model_from_spec(config.model)
    _require_condition(model)
    n = config.effective_n()
    ks_grid = geometric_grid(n)
    norm = np.sqrt(ks_grid / (2.0 * np.array([guarded_loglog(k) for k in ks_grid])))

    def one(r):
        path = model.sample(n, (config.seed, _TAG_PATH, r))
        w1s = prefix_w1_on_grid(path, model.marginal, ks_grid)
        traj = norm * w1s
        return traj, np.maximum.accumulate(traj)

    results = _map_replicates(one, config.replicates, config.threads)
    kernel = limit_kernel(model, config)
    bracket = kappa_bounds(kernel, config.limit_draws, (config.seed, _TAG_KAPPA))
    meta = _meta(config, model)
    rows = []
    terminal = []
    for r, (traj, runmax) in enumerate(results):
        terminal.append(float(runmax[-1]))
        rows.extend(
            meta + (r, int(k), float(t), float(m))
            for k, t, m in zip(ks_grid, traj, runmax)
        )
    below = sum(1 for t in terminal if t <= bracket.upper)
    summary = {
        "experiment": "lil",
        "config_hash": config.config_hash,
        "model": model.name,
        "n": n,
        "replicates": config.replicates,
        "kappa_lower": bracket.lower,
        "kappa_upper": bracket.upper,
        "kappa_upper_se": bracket.upper_se,
        "terminal_running_max": terminal,
        "fraction_below_kappa_upper": below / len(terminal),
    }
    return ExperimentResult(
        config,
        ["config_hash", "model", "replicate", "n", "normalized_w1", "running_max"],
        rows, summary,
    )


# -- prop1 ----------------------------------------------------------------------


def run_prop1(config: ExperimentConfig) -> ExperimentResult:
    model = model_from_spec(config.model)
    try:
        V = compute_V(model.mixing, DEFAULT_QUAD)
    except W1MixError as exc:
        raise PreconditionError(f"mixing scale V diverges for {model.name}: {exc}")
    n_grid = config.effective_n_grid()
    nmax = n_grid[-1]
    ks_grid = geometric_grid(nmax)
    ks_grid = np.unique(np.concatenate([ks_grid, np.array(n_grid, dtype=int)]))

    def one(r):
        path = model.sample(nmax, (config.seed, _TAG_PATH, r))
        w1s = prefix_w1_on_grid(path, model.marginal, ks_grid)
        runmax = np.maximum.accumulate(ks_grid * w1s)
        out = []
        for n in n_grid:
            idx = int(np.searchsorted(ks_grid, n, side="right")) - 1
            denom = V * math.sqrt(n * guarded_loglog(n))
            num = float(runmax[idx])
            out.append(0.0 if num == 0.0 else (math.inf if denom == 0.0 else num / denom))
        return out

    results = _map_replicates(one, config.replicates, config.threads)
    meta = _meta(config, model)
    rows = [
        meta + (r, int(n), float(t))
        for r, ts in enumerate(results)
        for n, t in zip(n_grid, ts)
    ]
    per_n = {int(n): [ts[i] for ts in results] for i, n in enumerate(n_grid)}
    medians = {n: float(np.median(v)) for n, v in per_n.items()}
    quantiles = {
        n: {"p50": float(np.median(v)), "p90": float(np.quantile(v, 0.9)),
            "max": float(np.max(v))}
        for n, v in per_n.items()
    }
    first, last = medians[n_grid[0]], medians[n_grid[-1]]
    summary = {
        "experiment": "prop1",
        "config_hash": config.config_hash,
        "model": model.name,
        "V": V,
        "n_grid": [int(v) for v in n_grid],
        "replicates": config.replicates,
        "medians": {str(k): v for k, v in medians.items()},
        "quantiles": {str(k): v for k, v in quantiles.items()},
        "terminal_over_initial_median": (last / first) if first > 0 else 0.0,
        # descriptive only: an empirical proxy, not the universal constant
        "eta_estimate": float(max(q["max"] for q in quantiles.values())),
    }
    return ExperimentResult(
        config, ["config_hash", "model", "replicate", "n", "max_stat"], rows, summary
    )


# -- cvar -------------------------------------------------------------------------


def run_cvar(config: ExperimentConfig) -> ExperimentResult:
    model = model_from_spec(config.model)
    _require_condition(model)
    u = config.u
    n_grid = config.effective_n_grid()
    nmax = n_grid[-1]
    exact = cvar_exact(model.marginal, u)
    kernel = limit_kernel(model, config)
    bracket = kappa_bounds(kernel, config.limit_draws, (config.seed, _TAG_KAPPA))
    envelopes = {
        n: bracket.upper / u * math.sqrt(2.0 * guarded_loglog(n) / n) for n in n_grid
    }
    slack = DEFAULT_QUAD.abs_tol + 1e-8 * max(1.0, abs(exact))

    def one(r):
        path = model.sample(nmax, (config.seed, _TAG_PATH, r))
        out = []
        for n in n_grid:
            batch = SampleBatch.from_values(path[:n])
            err = abs(cvar_empirical(batch, u) - exact)
            bound = w1_empirical_vs_cdf(batch, model.marginal) / u
            if err > bound + slack:
                raise W1MixError(
                    f"transport bound violated: replicate {r} n {n}: "
                    f"error {err} > bound {bound}"
                )
            out.append((n, err, bound, envelopes[n]))
        return out

    results = _map_replicates(one, config.replicates, config.threads)
    meta = _meta(config, model)
    rows = [
        meta + (r, int(n), float(e), float(b), float(env))
        for r, recs in enumerate(results)
        for n, e, b, env in recs
    ]
    per_n = {int(n): [] for n in n_grid}
    for recs in results:
        for n, e, _, _ in recs:
            per_n[int(n)].append(e)
    summary = {
        "experiment": "cvar",
        "config_hash": config.config_hash,
        "model": model.name,
        "u": u,
        "n_grid": [int(v) for v in n_grid],
        "replicates": config.replicates,
        "cvar_exact": exact,
        "bound_violations": 0,  # a violation raises before reaching here
        "median_error": {str(n): float(np.median(v)) for n, v in per_n.items()},
        "kappa_upper": bracket.upper,
        "envelopes": {str(n): float(envelopes[n]) for n in n_grid},
        "rate_note": "asymptotic envelope; no finite-n guarantee",
    }
    return ExperimentResult(
        config,
        ["config_hash", "model", "replicate", "n", "cvar_error", "w1_bound", "envelope"],
        rows, summary,
    )


# -- bivariate ----------------------------------------------------------------------


def _pair_grid(mu_X, mu_Y, size):
    lo = min(float(mu_X.quantile(1e-4)), float(mu_Y.quantile(1e-4)))
    hi = max(float(mu_X.quantile(1.0 - 1e-4)), float(mu_Y.quantile(1.0 - 1e-4)))
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    return Grid.regular(lo, hi, size)


def run_bivariate(config: ExperimentConfig) -> ExperimentResult:
    model_x = model_from_spec(config.model)
    model_y = model_from_spec(config.model2 if config.model2 is not None else config.model)
    _require_condition(model_x)
    _require_condition(model_y)
    n = config.effective_n()
    mu_X, mu_Y = model_x.marginal, model_y.marginal
    knots = []
    for spec in (mu_X, mu_Y):
        if spec.q_knots is not None:
            knots.extend(float(k) for k in spec.q_knots)
    analytic_w1 = quantile_w1(mu_X.quantile, mu_Y.quantile, DEFAULT_QUAD,
                              sorted(set(knots)))
    sqrt_n = math.sqrt(n)

    def one(r):
        x = model_x.sample(n, (config.seed, _TAG_PATH, r))
        y = model_y.sample(n, (config.seed, _TAG_PAIR, r))
        emp = w1_empirical_vs_empirical(
            SampleBatch.from_values(x), SampleBatch.from_values(y)
        )
        stat = n * (float(emp) - analytic_w1)
        return stat, stat / sqrt_n

    results = _map_replicates(one, config.replicates, config.threads)

    grid = _pair_grid(mu_X, mu_Y, config.grid_size)
    if model_x.kind == "iid" and model_y.kind == "iid":
        # independent components: the difference-indicator kernel is the sum
        kernel = CovarianceKernel(
            grid=grid,
            matrix=exact_kernel_iid(mu_X, grid).matrix
            + exact_kernel_iid(mu_Y, grid).matrix,
        )
    else:
        n_k = int(config.kernel_n) if config.kernel_n is not None else max(200000, n)
        bw = config.effective_bandwidth(n_k)
        path_x = model_x.sample(n_k, (config.seed, _TAG_KERNEL, 0))
        path_y = model_y.sample(n_k, (config.seed, _TAG_KERNEL, 1))
        FX = np.asarray(mu_X.cdf(grid.points), dtype=float)
        FY = np.asarray(mu_Y.cdf(grid.points), dtype=float)
        kernel = bartlett_indicator_kernel(
            [(1, path_x), (-1, path_y)], FX - FY, grid, bw
        )

    zdraws = simulate_Z(kernel, min(config.limit_draws, 50000), (config.seed, _TAG_LIMIT))
    phi_vals = phi_on_rows(zdraws, grid, mu_X.cdf, mu_Y.cdf)
    normalized = [v for _, v in results]
    ks = ks_2samp(normalized, phi_vals)
    meta = (config.config_hash, f"{model_x.name}|{model_y.name}")
    rows = [meta + (r, n, float(s), float(v)) for r, (s, v) in enumerate(results)]
    summary = {
        "experiment": "bivariate",
        "config_hash": config.config_hash,
        "model": model_x.name,
        "model2": model_y.name,
        "n": n,
        "replicates": config.replicates,
        "analytic_w1": analytic_w1,
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "ks_level": config.ks_level,
        "verdict": "pass" if ks.pvalue > config.ks_level else "fail",
        "mean_normalized_stat": float(np.mean(normalized)),
        "limit_mean": float(np.mean(phi_vals)),
    }
    return ExperimentResult(
        config,
        ["config_hash", "model", "replicate", "n", "stat", "normalized_stat"],
        rows, summary,
    )


_RUNNERS = {
    "clt": run_clt,
    "lil": run_lil,
    "prop1": run_prop1,
    "cvar": run_cvar,
    "bivariate": run_bivariate,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    return _RUNNERS[config.experiment](config)


# -- artifacts ---------------------------------------------------------------------


def _format_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_outputs(result: ExperimentResult, out_dir):
    """Write results.csv and summary.json; byte-deterministic given config."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, "results.csv")
    with open(csv_path, "w", newline="\n") as f:
        f.write(",".join(result.header) + "\n")
        for row in result.rows:
            f.write(",".join(_format_cell(v) for v in row) + "\n")
    summary = dict(result.summary)
    summary["config"] = result.config.to_dict()
    json_path = os.path.join(out_dir, "summary.json")
    with open(json_path, "w", newline="\n") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return csv_path, json_path
