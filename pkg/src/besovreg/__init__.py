"""Wavelet-Besov Tikhonov regularization for periodic ill-posed problems in one dimension."""

from .analysis import (
    IndexFunctionSpec,
    NoiseSpec,
    adjoint_range_check,
    converse_gamma,
    effective_noise,
    fenchel_psi,
    interpolation_check,
    modulus_lower_bound,
    noise_besov_norm,
    psi_constant,
    sample_white_noise,
    sparsity_level_bound,
    verify_sparsity,
    vsc_constants,
    vsc_phi,
)
from .besov import (
    BallSpec,
    BesovIndex,
    besov_norm,
    jackson_bound,
    lower_bound_probe,
    make_extremal,
    seminorm_pn,
    seminorm_pn_perp,
)
from .checks import CheckResult, run_check
from .errors import (
    BesovRegError,
    ConfigurationError,
    NumericalDomainError,
    ParameterError,
    SingularInstanceError,
    StepRuleError,
)
from .operators import (
    ConvolutionModel,
    ForwardModel,
    HammersteinModel,
    conv_model,
    estimate_smoothing_constants,
    hammerstein_model,
    operator_norm,
    smoothing_operator_norm,
)
from .output import emit_outputs, load_manifest, spec_from_manifest
from .prox import penalty_value, project_lq_ball, prox_block_lp, prox_penalty
from .solver import (
    SolveConfig,
    SolveResult,
    choose_alpha_deterministic,
    choose_alpha_statistical,
    solve_tikhonov,
    solve_tikhonov_stat,
)
from .studies import RateStudyResult, RateStudySpec, fit_slope, run_rate_study, run_tv_study
from .wavelet import (
    CoeffField,
    GridFunction,
    WaveletSystem,
    analyze,
    function_coefficients,
    function_samples,
    level_block,
    synthesize,
)

__version__ = "0.1.0"
