"""Coefficient error metrics and the data-savings calculation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import isotonic_regression

from .errors import DataValidationError, NumericalError

DEFAULT_MAPE_EPSILON = 0.1


def _pair(beta_hat, beta_star):
    a = np.asarray(beta_hat, dtype=float).reshape(-1)
    b = np.asarray(beta_star, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise DataValidationError(f"coefficient vectors differ in length: {a.size} vs {b.size}")
    return a, b


def absolute_percentage_errors(beta_hat, beta_star, epsilon=DEFAULT_MAPE_EPSILON) -> np.ndarray:
    a, b = _pair(beta_hat, beta_star)
    if epsilon < 0:
        raise DataValidationError("epsilon must be nonnegative")
    denom = np.abs(b) + epsilon
    if np.any(denom == 0):
        raise DataValidationError("a true coefficient is zero; use epsilon > 0")
    return np.abs(a - b) / denom * 100.0


def mape(beta_hat, beta_star, epsilon=DEFAULT_MAPE_EPSILON) -> float:
    """Mean absolute percentage error, ``epsilon`` added to each ``|beta*_j|``."""
    return float(absolute_percentage_errors(beta_hat, beta_star, epsilon).mean())


def mse(beta_hat, beta_star) -> float:
    a, b = _pair(beta_hat, beta_star)
    return float(np.mean((a - b) ** 2))


def l2_error(beta_hat, beta_star) -> float:
    a, b = _pair(beta_hat, beta_star)
    return float(np.linalg.norm(a - b))


@dataclass(frozen=True)
class SavingsEntry:
    n1: int
    n2: float
    percent: float
    extrapolated: bool = False


@dataclass
class MetricsReport:
    per_feature_ape: np.ndarray
    mape: float
    mse: float
    epsilon: float
    savings: list[SavingsEntry] = field(default_factory=list)

    @classmethod
    def compute(cls, beta_hat, beta_star, epsilon=DEFAULT_MAPE_EPSILON):
        ape = absolute_percentage_errors(beta_hat, beta_star, epsilon)
        return cls(ape, float(ape.mean()), mse(beta_hat, beta_star), epsilon)

    def to_dict(self):
        return {"per_feature_ape": self.per_feature_ape, "mape": self.mape, "mse": self.mse,
                "epsilon": self.epsilon, "savings": [s.__dict__ for s in self.savings]}


@dataclass(frozen=True)
class ErrorCurve:
    """Mean estimation error of the primary-only estimator against primary sample size."""

    sizes: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=float)
        errors = np.asarray(self.errors, dtype=float)
        if sizes.ndim != 1 or sizes.shape != errors.shape or sizes.size < 2:
            raise DataValidationError("an error curve needs at least two (size, error) points")
        if np.any(sizes <= 0) or np.any(np.diff(sizes) <= 0):
            raise DataValidationError("curve sizes must be positive and strictly increasing")
        if not np.all(np.isfinite(errors)) or np.any(errors <= 0):
            raise DataValidationError("curve errors must be finite and positive")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "errors", errors)

    @classmethod
    def from_points(cls, points):
        pts = sorted((float(s), float(e)) for s, e in points)
        return cls([p[0] for p in pts], [p[1] for p in pts])

    def smoothed(self) -> np.ndarray:
        """Non-increasing fit to the errors (pool-adjacent-violators)."""
        return isotonic_regression(self.errors, increasing=False).x

    def size_for_error(self, target, extrapolate=False) -> tuple[float, bool]:
        """Sample size at which the smoothed curve reaches ``target``.

        Interpolates ``log error`` linearly in ``log size`` (exact for power
        laws). Outside the curve's range the end segments are extended if
        ``extrapolate``; the second return value flags that case.
        """
        if not target > 0:
            raise DataValidationError("target error must be positive")
        log_n = np.log(self.sizes)
        log_e = np.log(self.smoothed())
        lt = np.log(target)
        if log_e[-1] <= lt <= log_e[0]:
            # first crossing; flat stretches resolve to the smallest size
            i = int(np.nonzero(log_e <= lt)[0][0])
            if i == 0 or log_e[i] == lt:
                return float(np.exp(log_n[i])), False
            frac = (log_e[i - 1] - lt) / (log_e[i - 1] - log_e[i])
            return float(np.exp(log_n[i - 1] + frac * (log_n[i] - log_n[i - 1]))), False
        if not extrapolate:
            raise NumericalError(f"target error {target:.4g} outside the curve range "
                                 f"[{np.exp(log_e[-1]):.4g}, {np.exp(log_e[0]):.4g}]")
        a, b = (0, 1) if lt > log_e[0] else (-2, -1)
        slope = (log_e[b] - log_e[a]) / (log_n[b] - log_n[a])
        if slope >= 0:
            raise NumericalError("cannot extrapolate along a flat curve segment")
        return float(np.exp(log_n[a] + (lt - log_e[a]) / slope)), True


def data_savings(aae_error, primary_error_curve: ErrorCurve, n1, extrapolate=False) -> SavingsEntry:
    """Percent of human data saved: ``(n2 - n1) / n2 * 100``.

    ``n2`` is the primary-only sample size whose error matches ``aae_error``,
    the error the AI-augmented estimator reaches with ``n1`` primary tasks.
    """
    if n1 <= 0:
        raise DataValidationError("n1 must be positive")
    n2, flagged = primary_error_curve.size_for_error(aae_error, extrapolate)
    return SavingsEntry(int(n1), n2, (n2 - n1) / n2 * 100.0, flagged)
