"""Empirical Wasserstein-1 distance machinery for stationary mixing sequences."""

from .bivariate import BivariatePath, bivariate_w1_statistic, phi_functional
from .cvar import (
    CVaRReport,
    cvar_empirical,
    cvar_error_bound,
    cvar_exact,
    cvar_rate_annotation,
    cvar_report,
)
from .distributions import (
    DistributionSpec,
    EmpiricalCDF,
    SampleBatch,
    discrete,
    from_batch,
    lattice_convolution,
    marginal_from_spec,
    normal,
    point_mass,
    uniform,
)
from .errors import (
    DivergenceError,
    IndefiniteKernelError,
    InputError,
    PreconditionError,
    W1MixError,
)
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    run_experiment,
    write_outputs,
)
from .gaussian import (
    CovarianceKernel,
    Grid,
    KappaBracket,
    estimate_kernel_mc,
    exact_kernel_iid,
    exact_kernel_markov,
    kappa_bounds,
    l1_norm_distribution,
    simulate_Z,
)
from .mixing import (
    ConditionCheck,
    MixingProfile,
    R_inverse,
    R_of,
    TruncationSchedule,
    check_condition_2_2,
    compute_V,
    gine_integral,
    rq_integral,
    truncation_schedule,
)
from .processes import (
    ProcessModel,
    make_constant,
    make_finite_markov,
    make_gaussian_ar1,
    make_iid,
    make_m_dependent,
    model_from_spec,
    stream,
)
from .quadrature import DEFAULT_QUAD, QuadratureConfig, guarded_loglog
from .wasserstein import (
    LipschitzFn,
    expectation_under,
    prefix_w1_on_grid,
    quantile_w1,
    w1_dual_lower_bound,
    w1_empirical_vs_cdf,
    w1_empirical_vs_empirical,
)

__version__ = "0.1.0"
