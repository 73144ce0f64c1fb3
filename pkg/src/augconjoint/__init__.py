"""Conjoint choice estimation augmented with AI-generated labels.

Fit multinomial logit part-worths from a small human-labelled sample plus a
large AI-labelled sample, with plug-in asymptotic inference and a simulation
lab for checking when augmentation helps.
"""

from .choice import ChoiceTask, Dataset, DatasetKind, FitOptions, fit_mnl, mnl_probs, soft_loglik
from .errors import (
    ChoiceModelError,
    ConvergenceError,
    DataValidationError,
    IdentificationError,
    NumericalError,
    SeparationError,
    SingularMatrixError,
)
from .estimators import EstimatorKind, EstimatorResult, fit_aae, fit_baseline, fit_estimator
from .gmodels import FixedG, MlpG, MlpOptions, ParametricG, fit_g
from .inference import AsymptoticReport, dominance_check, estimate_asymptotics, population_asymptotics
from .metrics import ErrorCurve, MetricsReport, data_savings, mape, mse
from .simlab import (
    AlignmentWorld,
    MisalignedWorld,
    SingleProductWorld,
    benchmark_world,
    oracle_beta_star,
    sample_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentWorld", "AsymptoticReport", "ChoiceModelError", "ChoiceTask", "ConvergenceError", "DataValidationError", "Dataset",
    "DatasetKind", "ErrorCurve", "EstimatorKind", "EstimatorResult", "FitOptions", "FixedG", "IdentificationError",
    "MetricsReport", "MisalignedWorld", "MlpG", "MlpOptions", "NumericalError", "ParametricG", "SeparationError",
    "SingleProductWorld", "SingularMatrixError", "benchmark_world", "data_savings", "dominance_check", "estimate_asymptotics", "fit_aae", "fit_baseline",
    "fit_estimator", "fit_g", "fit_mnl", "mape", "mnl_probs", "mse", "oracle_beta_star", "population_asymptotics",
    "sample_dataset", "soft_loglik",
]
