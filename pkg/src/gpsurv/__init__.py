"""Gaussian-process survival analysis.

Accelerated failure-time regression with a latent GP over transformed event
times (right and interval censoring), a two-output convolution-kernel
extension for competing risks, a GP hazard-rate model with Weibull base
hazard, a Weibull proportional-hazards baseline, Laplace-approximation
hyperparameter selection, predictive event-time densities and reproducible
data simulators.
"""

from .baselines import (
    WphmParams,
    fit_wphm,
    wphm_hazard,
    wphm_nll,
    wphm_pdf,
    wphm_predict_mean,
    wphm_survival,
)
from .data import SurvivalDataset
from .errors import (
    GpsurvError,
    IllConditionedKernelError,
    NonConvergenceError,
    NumericError,
    ValidationError,
    WrongLikelihoodError,
)
from .inference import (
    FittedModel,
    HyperParams,
    ModelKind,
    fit_hyperparameters,
    fit_map,
    force_independent,
    laplace_nll_hyp,
)
from .kernels import (
    GramMatrix,
    MultiKernelParams,
    SingleKernelParams,
    build_gram,
    multi_cov,
    se_ard,
)
from .likelihoods import (
    NllReport,
    hazard_ratio,
    log_survival_gauss,
    nll_competing,
    nll_gp_hazard,
    nll_gp_hazard_interval,
    nll_interval,
    nll_single,
    stable_log_diff_exp,
)
from .prediction import (
    GpHazardPrediction,
    PredictiveDensity,
    WideDistributionWarning,
    disabled_risk_survival,
    gp_hazard_predict,
    hazard_curve,
    predict_latent,
    predictive_density,
    predictive_median,
    predictive_moments,
    predictive_pdf,
    survival_curve,
)
from .simulate import (
    SimResult,
    SimSpec,
    intervalize,
    simulate,
    simulate_gp_competing,
    simulate_gp_single,
    simulate_wphm,
)
from .timescale import (
    TransformConfig,
    default_transform,
    from_latent,
    log_jacobian,
    to_latent,
)

__version__ = "0.1.0"

__all__ = [
    "GpsurvError",
    "ValidationError",
    "WrongLikelihoodError",
    "IllConditionedKernelError",
    "NonConvergenceError",
    "NumericError",
    "TransformConfig",
    "to_latent",
    "from_latent",
    "log_jacobian",
    "default_transform",
    "SingleKernelParams",
    "MultiKernelParams",
    "GramMatrix",
    "se_ard",
    "multi_cov",
    "build_gram",
    "SurvivalDataset",
    "NllReport",
    "hazard_ratio",
    "log_survival_gauss",
    "stable_log_diff_exp",
    "nll_single",
    "nll_interval",
    "nll_competing",
    "nll_gp_hazard",
    "nll_gp_hazard_interval",
    "ModelKind",
    "HyperParams",
    "FittedModel",
    "fit_map",
    "laplace_nll_hyp",
    "fit_hyperparameters",
    "force_independent",
    "PredictiveDensity",
    "GpHazardPrediction",
    "WideDistributionWarning",
    "predict_latent",
    "predictive_density",
    "predictive_pdf",
    "predictive_moments",
    "predictive_median",
    "survival_curve",
    "hazard_curve",
    "disabled_risk_survival",
    "gp_hazard_predict",
    "WphmParams",
    "fit_wphm",
    "wphm_nll",
    "wphm_predict_mean",
    "wphm_pdf",
    "wphm_survival",
    "wphm_hazard",
    "SimSpec",
    "SimResult",
    "simulate",
    "simulate_gp_single",
    "simulate_gp_competing",
    "simulate_wphm",
    "intervalize",
    "__version__",
]
