"""Sample-path synthesis for linear (multi)fractional stable motion.

The process is built from a Haar-type series in two halves: a
high-frequency half driven by dyadic cells inside [0, 1] and a
low-frequency half collecting the coarse and far-past cells.  Both are
evaluated either term by term or through a summation-by-parts
rearrangement that consumes coefficient prefix sums.  On top of the
synthesis sit validation tools: closed-form and quadrature marginal
scales, truncation-error rate measurement, and a coefficient-growth
diagnostic.
"""

__version__ = "0.1.0"

from .analysis import (
    ConvergenceReport,
    GrowthDiagnostic,
    GrowthScan,
    coefficient_growth_diagnostic,
    convergence_study,
    estimate_scale,
    first_abs_moment,
    growth_scan,
    mc_x1_samples,
    mc_x2_samples,
    sup_norm_diff,
    truncated_scale_hf,
    truncated_scale_lf,
    x1_theoretical_scale,
    x2_theoretical_scale,
)
from .errors import (
    ComputeError,
    ConfigError,
    DepthError,
    HaarLmsmError,
    ParameterError,
    ResolutionError,
    StatisticsError,
)
from .kernels import (
    KernelParams,
    big_theta,
    dbig_theta_dx,
    dtheta_dx,
    theta,
    theta_quadrature_oracle,
    truncated_power,
)
from .lmsm import (
    HurstFunction,
    PathSample,
    clamp_hurst,
    hurst_preset,
    path_to_csv,
    read_path_csv,
    synthesize_path,
    validate_params,
    write_path_csv,
)
from .series import (
    EvalDomain,
    FieldSample,
    evaluate_field,
    x1_partial,
    x2_minus_partial,
    x2_partial,
    x2_plus_partial,
)
from .stable_rng import (
    CoefficientPyramid,
    LevyGrid,
    PrefixSums,
    StableLaw,
    build_levy_grid,
    generate_coefficients,
    load_pyramid,
    make_rng,
    prefix_sums,
    sample_sas,
    save_pyramid,
    zeta_from_levy,
)

__all__ = [
    "ComputeError",
    "ConfigError",
    "DepthError",
    "HaarLmsmError",
    "ParameterError",
    "ResolutionError",
    "StatisticsError",
    "KernelParams",
    "theta",
    "big_theta",
    "dtheta_dx",
    "dbig_theta_dx",
    "theta_quadrature_oracle",
    "truncated_power",
    "StableLaw",
    "LevyGrid",
    "CoefficientPyramid",
    "PrefixSums",
    "make_rng",
    "sample_sas",
    "build_levy_grid",
    "zeta_from_levy",
    "generate_coefficients",
    "prefix_sums",
    "save_pyramid",
    "load_pyramid",
    "EvalDomain",
    "FieldSample",
    "x1_partial",
    "x2_plus_partial",
    "x2_minus_partial",
    "x2_partial",
    "evaluate_field",
    "HurstFunction",
    "PathSample",
    "hurst_preset",
    "validate_params",
    "clamp_hurst",
    "synthesize_path",
    "path_to_csv",
    "write_path_csv",
    "read_path_csv",
    "first_abs_moment",
    "estimate_scale",
    "sup_norm_diff",
    "x1_theoretical_scale",
    "x2_theoretical_scale",
    "truncated_scale_hf",
    "truncated_scale_lf",
    "mc_x1_samples",
    "mc_x2_samples",
    "ConvergenceReport",
    "convergence_study",
    "GrowthDiagnostic",
    "GrowthScan",
    "coefficient_growth_diagnostic",
    "growth_scan",
    "__version__",
]
