"""Stein variational gradient descent with locally refined neural surrogates.

Gradient-free posterior sampling for Bayesian inverse problems: the
forward model is emulated by a small multilayer perceptron whose training
set grows adaptively in the region the particles visit, so the expensive
model is evaluated only a bounded number of times.
"""

from .errors import (
    DegenerateBandwidthError,
    InvalidCoefficientError,
    NonFiniteScoreError,
    SingularModelError,
)
from .kernel import median_bandwidth, rbf_evaluate, rbf_grad_first_arg, rbf_kernel_matrix
from .metrics import mmd, rel_error
from .posterior import (
    GaussianLikelihood,
    LogNormalPrior,
    PosteriorSpec,
    StandardNormalPrior,
    UniformBoxPrior,
    log_posterior,
    make_score_function,
    score,
)
from .refinement import (
    EvalBudget,
    RefinementConfig,
    RefineReport,
    design_point,
    error_indicator,
    refine_step,
    run_lsvgd,
    select_points,
)
from .surrogate import (
    Architecture,
    InputScaler,
    SurrogateParams,
    TrainConfig,
    TrainingSet,
    init_params,
    input_jacobian,
    input_jacobian_batch,
    load_params,
    loss,
    mlp_forward,
    param_gradient,
    save_params,
    swish,
    train,
    warm_start_refine,
)
from .svgd import AdaGradState, ParticleSet, adagrad_step, run_svgd, svgd_direction

__version__ = "0.1.0"

__all__ = [
    "AdaGradState",
    "Architecture",
    "DegenerateBandwidthError",
    "EvalBudget",
    "GaussianLikelihood",
    "InputScaler",
    "InvalidCoefficientError",
    "LogNormalPrior",
    "NonFiniteScoreError",
    "ParticleSet",
    "PosteriorSpec",
    "RefineReport",
    "RefinementConfig",
    "SingularModelError",
    "StandardNormalPrior",
    "SurrogateParams",
    "TrainConfig",
    "TrainingSet",
    "UniformBoxPrior",
    "adagrad_step",
    "design_point",
    "error_indicator",
    "init_params",
    "input_jacobian",
    "input_jacobian_batch",
    "load_params",
    "log_posterior",
    "loss",
    "make_score_function",
    "median_bandwidth",
    "mlp_forward",
    "mmd",
    "param_gradient",
    "rbf_evaluate",
    "rbf_grad_first_arg",
    "rbf_kernel_matrix",
    "refine_step",
    "rel_error",
    "run_lsvgd",
    "run_svgd",
    "save_params",
    "score",
    "select_points",
    "svgd_direction",
    "swish",
    "train",
    "warm_start_refine",
]
