"""Numerical laboratory for margin-condition classification rates of clipped
ReLU networks: synthetic distributions with exact conditional means,
regularized square-loss training, risk estimators, closed-form bound
calculators, and a deterministic experiment harness.
"""

from .bounds import (
    ApproxConstants,
    BoundInputs,
    BoundPreconditionError,
    BoundReport,
    RateSizing,
    SizingInputs,
    TermValue,
    WellSpecifiedBound,
    approx_constants,
    covering_bound,
    excess_risk_bound,
    lipschitz_bound,
    rate_ceiling_hard_margin,
    rate_ceiling_low_noise,
    sizing_for_rate,
    well_specified_bound,
)
from .distributions import (
    Marginal,
    SyntheticDistribution,
    TeacherSpec,
    analytic_family,
    bayes_classify,
    bayes_regression,
    bayes_risk,
    bayes_signs,
    distribution_from_descriptor,
    load_dataset,
    sample,
    save_dataset,
    strict_sign,
    teacher_student,
)
from .experiment import (
    ConfigValidationError,
    ExperimentConfig,
    RateFit,
    ResultRow,
    emit_report,
    fit_rate,
    parse_config_dict,
    run_experiment,
    validate_config,
)
from .metrics import (
    ExponentUndefinedError,
    InequalityReport,
    MarginCurve,
    NoiseExponentFit,
    RiskEstimate,
    check_hard_margin,
    excess_risk,
    fit_noise_exponent,
    induced_classifier,
    l2_distance,
    margin_curve,
    misclass_risk,
    risk_inequality_report,
)
from .nets import (
    Architecture,
    ClipSpec,
    Parametrization,
    ShapeMismatchError,
    clip_network,
    clip_values,
    evaluation_grid,
    forward,
    forward_clipped,
    from_json_dict,
    linf_dist,
    linf_norm,
    load_parametrization,
    lp_norm_p,
    param_count,
    project_box,
    random_init,
    realization_distance,
    save_parametrization,
    sup_distance,
    to_json_dict,
    uniform_parametrization,
)
from .seeding import derive_seed
from .training import (
    Dataset,
    TrainConfig,
    TrainResult,
    TrainingDivergedError,
    empirical_risk,
    objective_gradient,
    penalty,
    regularized_objective,
    smoothed_penalty,
    solve_lambda_erm,
    train_single,
)

__version__ = "0.1.0"
