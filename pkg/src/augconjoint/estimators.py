"""Primary-only, auxiliary-only, naive pooled and AI-augmented estimators."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

import numpy as np

from .choice import Dataset, DatasetKind, FitOptions, fit_mnl, one_hot
from .errors import DataValidationError
from .gmodels import fit_g


class EstimatorKind(str, enum.Enum):
    PRIMARY = "primary"
    AUXILIARY = "auxiliary"
    NAIVE = "naive"
    AAE = "aae"


@dataclass
class EstimatorResult:
    beta_hat: np.ndarray
    kind: EstimatorKind
    sample_sizes: tuple[int, int]
    g_model: Any = None

    def __post_init__(self):
        self.kind = EstimatorKind(self.kind)
        if (self.g_model is not None) != (self.kind is EstimatorKind.AAE):
            raise DataValidationError("a g model accompanies exactly the AI-augmented estimator")

    @property
    def rho(self) -> float:
        m, n = self.sample_sizes
        return n / m if m else float("inf")


def _require(dataset, kind, name):
    if dataset is None:
        raise DataValidationError(f"{name} data is required for this estimator")
    if dataset.kind is not kind:
        raise DataValidationError(f"{name} data has kind {dataset.kind.value}")
    return dataset


def fit_baseline(primary: Dataset | None, auxiliary: Dataset | None, mode, options: FitOptions | None = None):
    """Hard-label MLE on primary ``y``, auxiliary ``z``, or both pooled.

    ``mode`` is one of ``"primary"``, ``"auxiliary"``, ``"naive"``. The naive
    estimator stacks primary rows labelled by ``y`` with auxiliary rows
    labelled by ``z`` and fits one logit.
    """
    mode = EstimatorKind(mode)
    if mode is EstimatorKind.AAE:
        raise DataValidationError("use fit_aae for the AI-augmented estimator")
    m = len(primary) if primary is not None else 0
    n = len(auxiliary) if auxiliary is not None else 0
    blocks = []
    if mode in (EstimatorKind.PRIMARY, EstimatorKind.NAIVE):
        p = _require(primary, DatasetKind.PRIMARY, "primary")
        blocks.append((p.features, one_hot(p.human_labels, p.k)))
    if mode in (EstimatorKind.AUXILIARY, EstimatorKind.NAIVE):
        a = _require(auxiliary, DatasetKind.AUXILIARY, "auxiliary")
        blocks.append((a.features, one_hot(a.ai_labels, a.k)))
    if len({b[0].shape[1:] for b in blocks}) != 1:
        raise DataValidationError("primary and auxiliary data disagree on (k, d)")
    x = np.concatenate([b[0] for b in blocks])
    t = np.concatenate([b[1] for b in blocks])
    return EstimatorResult(fit_mnl(x, t, options), mode, (m, n))


def fit_aae(primary: Dataset, auxiliary: Dataset, g_variant="parametric", options: FitOptions | None = None,
            g_options=None) -> EstimatorResult:
    """Two-step AI-augmented estimator.

    Step 1 fits ``g(x, z) ~ P(y | x, z)`` on the primary data (``g_variant``
    is ``"parametric"``, ``"mlp"``, or an already fitted g model). Step 2
    maximizes the auxiliary-sample average of ``sum_j g_j(x_i, z_i) log
    sigma_j(x_i; beta)``; the fitted g is evaluated once per auxiliary task
    and used as its soft target.
    """
    _require(primary, DatasetKind.PRIMARY, "primary")
    _require(auxiliary, DatasetKind.AUXILIARY, "auxiliary")
    if len(primary) == 0 or len(auxiliary) == 0:
        raise DataValidationError("both primary and auxiliary data must be nonempty")
    if primary.features.shape[1:] != auxiliary.features.shape[1:]:
        raise DataValidationError("primary and auxiliary data disagree on (k, d)")
    if isinstance(g_variant, str):
        g_model = fit_g(primary, g_variant, g_options)
    else:
        g_model = g_variant
    targets = g_model.probs(auxiliary.features, auxiliary.ai_labels)
    beta = fit_mnl(auxiliary.features, targets, options)
    return EstimatorResult(beta, EstimatorKind.AAE, (len(primary), len(auxiliary)), g_model)


def fit_estimator(kind, primary, auxiliary, g_variant="parametric", options=None, g_options=None):
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.AAE:
        return fit_aae(primary, auxiliary, g_variant, options, g_options)
    return fit_baseline(primary, auxiliary, kind, options)
