"""Multinomial logit with an outside option, fitted against soft targets.

Alternative ``j = 1..k`` of a task has utility ``x_(j) @ beta``; the outside
option (index 0) always has utility zero. Every estimator in the package
reduces to maximizing the soft-target log-likelihood

    Q(beta) = (1/N) sum_i sum_{j=0..k} alpha_ij * log sigma_j(x_i; beta)

where a hard label is represented by its one-hot target. Probability vectors
and targets therefore have ``k + 1`` entries with the outside option first.

Functions accept a single :class:`ChoiceTask` / ``(k, d)`` array or a batch
``(N, k, d)`` array (or a :class:`Dataset`) and broadcast accordingly.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DataValidationError,
    IdentificationError,
    SeparationError,
)

logger = logging.getLogger(__name__)

_TINY = np.finfo(float).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)
TARGET_SUM_TOL = 1e-12


class DatasetKind(str, enum.Enum):
    PRIMARY = "primary"
    AUXILIARY = "auxiliary"


def _check_label(value, k, name):
    if value is None:
        return None
    if isinstance(value, (bool, np.bool_)) or int(value) != value:
        raise DataValidationError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if not 0 <= value <= k:
        raise DataValidationError(f"{name}={value} outside 0..{k}")
    return value


@dataclass(frozen=True, eq=False)
class ChoiceTask:
    """One respondent decision.

    Attributes:
        features: ``(k, d)`` matrix, row ``j - 1`` is alternative ``j``.
        human_label: chosen index in ``0..k`` (0 = outside option) or None.
        ai_label: AI-generated label in ``0..k`` or None.
    """

    features: np.ndarray
    human_label: int | None = None
    ai_label: int | None = None

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DataValidationError(f"features must be a non-empty (k, d) matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataValidationError("features contain non-finite entries")
        x.setflags(write=False)
        object.__setattr__(self, "features", x)
        k = x.shape[0]
        object.__setattr__(self, "human_label", _check_label(self.human_label, k, "human_label"))
        object.__setattr__(self, "ai_label", _check_label(self.ai_label, k, "ai_label"))

    @property
    def k(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def _label_array(labels, n, k, name):
    arr = np.asarray(labels)
    if arr.shape != (n,):
        raise DataValidationError(f"{name} must have shape ({n},), got {arr.shape}")
    if n and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise DataValidationError(f"{name} must be integers")
    arr = arr.astype(np.int64)
    if n and (arr.min() < 0 or arr.max() > k):
        raise DataValidationError(f"{name} outside 0..{k}")
    arr.setflags(write=False)
    return arr


class Dataset:
    """A batch of choice tasks sharing ``k`` and ``d``.

    Primary data carries both the human label ``y`` and the AI label ``z``;
    auxiliary data carries ``z`` only. Storage is columnar: ``features`` is
    ``(N, k, d)`` and the labels are integer vectors.
    """

    def __init__(self, features, kind, ai_labels, human_labels=None):
        x = np.array(features, dtype=float)
        if x.ndim != 3 or x.shape[1] < 1 or x.shape[2] < 1:
            raise DataValidationError(f"features must have shape (N, k, d) with k, d >= 1, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataValidationError("features contain non-finite entries")
        x.setflags(write=False)
        self.kind = DatasetKind(kind)
        n, k, _ = x.shape
        self.features = x
        self.ai_labels = _label_array(ai_labels, n, k, "ai_labels")
        if self.kind is DatasetKind.PRIMARY:
            if human_labels is None:
                raise DataValidationError("primary data requires human labels")
            self.human_labels = _label_array(human_labels, n, k, "human_labels")
        else:
            if human_labels is not None:
                raise DataValidationError("auxiliary data must not carry human labels")
            self.human_labels = None

    @classmethod
    def from_tasks(cls, tasks, kind, k=None, d=None):
        tasks = list(tasks)
        kind = DatasetKind(kind)
        if not tasks:
            if k is None or d is None:
                raise DataValidationError("an empty dataset needs explicit k and d")
            return cls(np.zeros((0, k, d)), kind, np.zeros(0, dtype=int),
                       np.zeros(0, dtype=int) if kind is DatasetKind.PRIMARY else None)
        shapes = {t.features.shape for t in tasks}
        if len(shapes) != 1:
            raise DataValidationError(f"tasks disagree on (k, d): {sorted(shapes)}")
        if any(t.ai_label is None for t in tasks):
            raise DataValidationError("every task needs an ai_label")
        y = None
        if kind is DatasetKind.PRIMARY:
            if any(t.human_label is None for t in tasks):
                raise DataValidationError("primary tasks need a human_label")
            y = [t.human_label for t in tasks]
        elif any(t.human_label is not None for t in tasks):
            raise DataValidationError("auxiliary tasks must not carry a human_label")
        return cls(np.stack([t.features for t in tasks]), kind, [t.ai_label for t in tasks], y)

    @property
    def k(self) -> int:
        return self.features.shape[1]

    @property
    def d(self) -> int:
        return self.features.shape[2]

    def __len__(self):
        return self.features.shape[0]

    @property
    def tasks(self) -> list[ChoiceTask]:
        y = self.human_labels
        return [ChoiceTask(self.features[i], None if y is None else int(y[i]), int(self.ai_labels[i]))
                for i in range(len(self))]

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        y = None if self.human_labels is None else self.human_labels[index]
        return Dataset(self.features[index], self.kind, self.ai_labels[index], y)

    def without_human_labels(self) -> "Dataset":
        return Dataset(self.features, DatasetKind.AUXILIARY, self.ai_labels)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        same_y = (self.human_labels is None and other.human_labels is None) or (
            self.human_labels is not None and other.human_labels is not None
            and np.array_equal(self.human_labels, other.human_labels))
        return (self.kind is other.kind and self.features.shape == other.features.shape
                and np.array_equal(self.features, other.features)
                and np.array_equal(self.ai_labels, other.ai_labels) and same_y)

    def __repr__(self):
        return f"Dataset(kind={self.kind.value}, n={len(self)}, k={self.k}, d={self.d})"


def as_features(obj) -> np.ndarray:
    """Return the ``(k, d)`` or ``(N, k, d)`` feature array behind ``obj``."""
    if isinstance(obj, (ChoiceTask, Dataset)):
        return obj.features
    x = np.asarray(obj, dtype=float)
    if x.ndim < 2 or x.shape[-1] < 1 or x.shape[-2] < 1:
        raise DataValidationError(f"features must be (k, d) or (N, k, d), got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataValidationError("features contain non-finite entries")
    return x


def check_beta(beta, d) -> np.ndarray:
    b = np.asarray(beta, dtype=float)
    if b.shape != (d,):
        raise DataValidationError(f"coefficient vector must have shape ({d},), got {b.shape}")
    if not np.all(np.isfinite(b)):
        raise DataValidationError("coefficient vector contains non-finite entries")
    return b


def one_hot(labels, k) -> np.ndarray:
    """Hard labels in ``0..k`` as one-hot targets of width ``k + 1``."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros(labels.shape + (k + 1,))
    np.put_along_axis(out, labels[..., None], 1.0, axis=-1)
    return out


def validate_targets(targets, k) -> np.ndarray:
    """Check soft targets: nonnegative rows of width ``k + 1`` summing to one."""
    t = np.asarray(targets, dtype=float)
    if t.shape[-1:] != (k + 1,):
        raise DataValidationError(f"targets must have trailing dimension {k + 1}, got shape {t.shape}")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise DataValidationError("targets must be finite and nonnegative")
    if np.any(np.abs(t.sum(axis=-1) - 1.0) > TARGET_SUM_TOL):
        raise DataValidationError("targets must sum to one")
    return t


# -- probabilities and derivatives ------------------------------------------------------------


def _log_probs(x, b):
    u = x @ b
    full = np.concatenate([np.zeros(u.shape[:-1] + (1,)), u], axis=-1)
    full -= full.max(axis=-1, keepdims=True)
    return full - np.log(np.exp(full).sum(axis=-1, keepdims=True))


def log_mnl_probs(task, beta) -> np.ndarray:
    """Log choice probabilities ``(..., k + 1)``, computed by log-sum-exp."""
    x = as_features(task)
    return _log_probs(x, check_beta(beta, x.shape[-1]))


def mnl_probs(task, beta) -> np.ndarray:
    """Choice probabilities ``(sigma_0, ..., sigma_k)`` of the logit model.

    The maximum utility (outside option included) is subtracted before
    exponentiating, so large coefficients cannot overflow. Entries are kept
    strictly inside (0, 1) even when an alternative underflows.
    """
    return np.clip(np.exp(log_mnl_probs(task, beta)), _TINY, _BELOW_ONE)


def _weights(weights, n):
    if weights is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise DataValidationError("weights must be a nonnegative vector with positive sum, one per task")
    return w / w.sum()


def _batch(features, targets):
    x = as_features(features)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise DataValidationError(f"expected (N, k, d) features, got shape {x.shape}")
    if x.shape[0] == 0:
        raise DataValidationError("at least one task is required")
    t = validate_targets(targets, x.shape[1])
    if t.ndim == 1:
        t = t[None]
    if t.shape != (x.shape[0], x.shape[1] + 1):
        raise DataValidationError(f"targets shape {t.shape} does not match features {x.shape}")
    return x, t


def soft_loglik(features, targets, beta, weights=None) -> float:
    """Mean soft-target log-likelihood ``(1/N) sum_i sum_j alpha_ij log sigma_ij``.

    ``weights`` turns the mean into a weighted average (used for exact
    population expectations over a finite support).
    """
    x, t = _batch(features, targets)
    b = check_beta(beta, x.shape[2])
    w = _weights(weights, x.shape[0])
    return float(w @ (t * _log_probs(x, b)).sum(axis=-1))


def soft_score(task, target, beta) -> np.ndarray:
    """Gradient of ``sum_j alpha_j log sigma_j`` in ``beta``.

    Equals ``sum_{j=1..k} (alpha_j - sigma_j) x_(j)``; batched inputs give one
    row per task.
    """
    x = as_features(task)
    b = check_beta(beta, x.shape[-1])
    t = validate_targets(target, x.shape[-2])
    resid = t[..., 1:] - np.exp(_log_probs(x, b))[..., 1:]
    return np.einsum("...j,...jd->...d", resid, x)


def _curvature(x, p):
    # p excludes the outside option
    mean_x = np.einsum("...j,...jd->...d", p, x)
    second = np.swapaxes(x * p[..., None], -1, -2) @ x
    a = second - mean_x[..., :, None] * mean_x[..., None, :]
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def curvature_matrix(task, beta) -> np.ndarray:
    """Negative Hessian of the per-task log-likelihood, ``A(x; beta)``.

    ``A = sum_j sigma_j x_j x_j^T - (sum_j sigma_j x_j)(sum_j sigma_j x_j)^T``,
    the covariance of the chosen feature row under the model. It does not
    depend on the target weights.
    """
    x = as_features(task)
    b = check_beta(beta, x.shape[-1])
    return _curvature(x, np.exp(_log_probs(x, b))[..., 1:])


def _mean_curvature(x, p, w):
    d = x.shape[-1]
    mean_x = np.einsum("nj,njd->nd", p, x)
    second = (x * (p * w[:, None])[..., None]).reshape(-1, d).T @ x.reshape(-1, d)
    a = second - (mean_x * w[:, None]).T @ mean_x
    return 0.5 * (a + a.T)


def quadratic_form_bounds(task, beta, direction):
    """Eigenvalue-style bounds on ``u^T A u`` for one task.

    Returns ``(lower, upper_product, upper_valid)`` where, with
    ``s = sum_j (x_(j) . u)^2``,

    * ``lower = sigma_0 * min_j sigma_j * s`` (Gershgorin, center minus radius),
    * ``upper_product = sigma_0 * max_j sigma_j * s``,
    * ``upper_valid = max_j sigma_j * s`` (from ``diag(sigma) - sigma sigma^T <= diag(sigma)``).

    ``upper_product`` is exact for ``k = 1`` but can be violated for
    ``k >= 2``; ``upper_valid`` always holds.
    """
    x = as_features(task)
    if x.ndim != 2:
        raise DataValidationError("quadratic_form_bounds takes a single task")
    p = mnl_probs(x, beta)
    u = np.asarray(direction, dtype=float)
    s = float(((x @ u) ** 2).sum())
    inside = p[1:]
    return p[0] * inside.min() * s, p[0] * inside.max() * s, inside.max() * s


# -- fitting ------------------------------------------------------------------------------------


@dataclass(frozen=True)
class FitOptions:
    """Controls for :func:`fit_mnl`.

    Attributes:
        tol: stop once the sup-norm of the mean gradient is below this.
        max_iter: Newton iteration budget.
        beta_cap: abort with :class:`SeparationError` once any coefficient
            exceeds this in absolute value.
        curvature_floor: at convergence, a smallest curvature eigenvalue below
            ``curvature_floor`` times the largest design eigenvalue is treated
            as quasi-separation.
        ridge_fallback: on separation, refit with penalty
            ``ridge_lambda * ||beta||^2`` instead of raising.
        ridge_lambda: penalty weight for the fallback.
        init: starting coefficients (default zeros).
    """

    tol: float = 1e-8
    max_iter: int = 200
    beta_cap: float = 1e3
    curvature_floor: float = 1e-6
    ridge_fallback: bool = False
    ridge_lambda: float = 1e-6
    init: tuple | None = None


def _objective(x, t, w, b, ridge):
    return float(w @ (t * _log_probs(x, b)).sum(axis=-1)) - ridge * float(b @ b)


def _newton(x, t, w, opts, ridge, design_scale):
    d = x.shape[2]
    b = np.zeros(d) if opts.init is None else check_beta(opts.init, d).copy()
    lp = _log_probs(x, b)
    f = float(w @ (t * lp).sum(axis=-1)) - ridge * float(b @ b)
    for it in range(opts.max_iter + 1):
        p = np.exp(lp)[..., 1:]
        grad = np.einsum("nj,njd->d", (t[..., 1:] - p) * w[:, None], x) - 2.0 * ridge * b
        curv = _mean_curvature(x, p, w)
        if np.max(np.abs(grad)) < opts.tol:
            if ridge == 0.0 and np.linalg.eigvalsh(curv)[0] < opts.curvature_floor * design_scale:
                raise SeparationError(
                    f"curvature vanishes at the optimum (quasi-separation), |beta|_inf={np.max(np.abs(b)):.3g}")
            logger.debug("newton converged in %d iterations", it)
            return b
        if it == opts.max_iter:
            break
        hess = curv + 2.0 * ridge * np.eye(d)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        slack = 8 * np.finfo(float).eps * (1.0 + abs(f))
        t_step = 1.0
        for _ in range(60):
            cand = b + t_step * step
            lp_c = _log_probs(x, cand)
            f_c = float(w @ (t * lp_c).sum(axis=-1)) - ridge * float(cand @ cand)
            if f_c >= f - slack:
                break
            t_step *= 0.5
        else:
            raise ConvergenceError(f"line search failed at iteration {it}, |grad|_inf={np.max(np.abs(grad)):.3g}")
        b, lp, f = cand, lp_c, f_c
        if np.max(np.abs(b)) > opts.beta_cap:
            raise SeparationError(f"coefficients diverged past {opts.beta_cap:g} (separation)")
    raise ConvergenceError(f"no convergence within {opts.max_iter} Newton iterations")


def fit_mnl(features, targets, options: FitOptions | None = None, weights=None) -> np.ndarray:
    """Maximize the (weighted) soft-target log-likelihood by damped Newton.

    Parameters
    ----------
    features : (N, k, d) array or Dataset
    targets : (N, k + 1) array of soft targets (use :func:`one_hot` for hard labels)
    options : FitOptions
    weights : optional (N,) nonnegative task weights

    Returns
    -------
    beta : (d,) array

    Raises
    ------
    IdentificationError
        the stacked design second moment is rank deficient.
    SeparationError
        coefficients diverge (unless ``options.ridge_fallback``).
    ConvergenceError
        the iteration budget is exhausted.
    """
    opts = options or FitOptions()
    x, t = _batch(features, targets)
    w = _weights(weights, x.shape[0])
    d = x.shape[2]
    flat = x.reshape(-1, d)
    design = (flat * np.repeat(w, x.shape[1])[:, None]).T @ flat
    if np.linalg.matrix_rank(design, hermitian=True) < d:
        raise IdentificationError("design second-moment matrix is rank deficient; coefficients not identified")
    scale = float(np.linalg.eigvalsh(design)[-1])
    try:
        return _newton(x, t, w, opts, 0.0, scale)
    except SeparationError:
        if not opts.ridge_fallback:
            raise
        warnings.warn(f"separation detected; refitting with ridge penalty {opts.ridge_lambda:g}", RuntimeWarning,
                      stacklevel=2)
        return _newton(x, t, w, FitOptions(**{**opts.__dict__, "init": None}), opts.ridge_lambda, scale)
