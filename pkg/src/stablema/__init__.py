"""Simulation and numerical verification for heavy-tailed moving averages.

Multivariate stationary processes driven by a shared symmetric stable
driver: exact-law path simulation on certified lattices, closed quadrature
for means and lag covariances of trigonometric functionals, deterministic
rate-bound ingredients, and a CLI harness that checks the predicted
normal-approximation rates by Monte Carlo.
"""
from .bounds import (
    AnIntegrand,
    RhoTable,
    an_function,
    an_integral,
    build_rho_table,
    gamma1_bound,
    gamma2_bound,
    rate_prediction,
    rho,
    rho_decay_check,
)
from .config import ExperimentConfig, load_config, parse_config, save_config
from .errors import (
    AccuracyError,
    ConfigError,
    ContractError,
    CoverageError,
    DivergenceError,
    DomainError,
    EmptyRequestError,
    HypothesisError,
    ParameterError,
    PlanningError,
    StablemaError,
)
from .harness import (
    D3ProxyDictionary,
    D3ProxyResult,
    RateFitResult,
    collect_vn,
    d3_proxy,
    default_dictionary,
    fit_rate,
    psd_clip,
    run_clt_experiment,
    run_covariance_experiment,
    run_rates_study,
    run_rho_table,
    run_simulate,
)
from .kernels import (
    KernelBank,
    KernelSpec,
    beta_norm,
    envelope_check,
    envelope_value,
    indicator_kernel,
    kernel_eval,
    kernel_eval_lattice,
    lfsn_alpha,
    lfsn_kernel,
    ou_kernel,
    power_kernel,
)
from .simulate import (
    PathMatrix,
    SimulationGrid,
    marginal_samples,
    marginal_scale,
    plan_grid,
    simulate_paths,
)
from .stable import (
    SeedStream,
    StableParams,
    char_fn_sbs,
    increment_scale,
    sample_sbs,
    sample_sbs_from,
)
from .stats import (
    CovMatrix,
    Functional,
    analytic_lag_covariance_trig,
    analytic_mean_trig,
    asymptotic_covariance,
    covariance_standard_errors,
    empirical_covariance,
    evaluate_vn,
    lattice_asymptotic_covariance,
    lattice_lag_covariance_trig,
    lattice_mean_trig,
    make_trig_functional,
)

__version__ = "0.1.0"
