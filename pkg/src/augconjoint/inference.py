"""Plug-in asymptotic covariance for the AI-augmented estimator.

With auxiliary sample size ``n``, primary sample size ``m`` and
``Omega = E[A(x; beta)]``, the estimator's covariance is approximately

    Var_aae = Omega^-1 J Omega^-1 / n + Omega^-1 Gamma Lambda Gamma^T Omega^-1 / m

against ``Var_primary = Omega^-1 Jcheck Omega^-1 / m`` for primary-only MLE.
The AI-augmented estimator wins for large ``n`` when ``Jcheck - Gamma Lambda
Gamma^T`` is positive definite; that matrix is the covariance of the residual
of projecting the primary score ``w`` on the first-stage score ``u``.

Every matrix here is a (weighted) sample average, so the same code serves
empirical plug-ins and exact expectations over a finite support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .choice import Dataset, DatasetKind, _log_probs, _mean_curvature, check_beta, one_hot
from .errors import DataValidationError, SingularMatrixError
from .simlab import FiniteSupport, World

MAX_CONDITION = 1e12
DOMINANCE_TOL = 1e-8


def symmetric_inverse(mat, name="matrix", max_condition=MAX_CONDITION):
    """Inverse of a symmetric positive definite matrix via eigendecomposition.

    Returns ``(inverse, condition_number)``; raises :class:`SingularMatrixError`
    if the condition number exceeds ``max_condition`` or an eigenvalue is not
    positive.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.size == 0:
        return mat.copy(), 1.0
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    cond = vals[-1] / vals[0] if vals[0] > 0 else np.inf
    if not cond <= max_condition:
        raise SingularMatrixError(f"{name} is singular or ill-conditioned (condition number {cond:.3g})", cond)
    inv = (vecs / vals) @ vecs.T
    return 0.5 * (inv + inv.T), float(cond)


def _sym(a):
    return 0.5 * (a + a.T)


@dataclass
class AsymptoticReport:
    """Plug-in matrices and the two competing covariance estimates.

    ``cross_hat`` is ``E[w u^T]``, the primary-sample route to ``Gamma``
    (equal to ``gamma_hat`` in population when g is the true conditional law).
    """

    omega_hat: np.ndarray
    gamma_hat: np.ndarray
    lambda_hat: np.ndarray
    j_hat: np.ndarray
    j_check_hat: np.ndarray
    cross_hat: np.ndarray
    m: int
    n: int
    var_aae: np.ndarray
    var_primary: np.ndarray
    dominance_eigs: np.ndarray
    omega_condition: float = field(default=np.nan)
    lambda_condition: float = field(default=np.nan)

    @property
    def rho(self) -> float:
        return self.n / self.m

    @property
    def dominance_matrix(self) -> np.ndarray:
        return _sym(self.j_check_hat - self.gamma_hat @ self.lambda_hat @ self.gamma_hat.T)

    def standard_errors(self, which="aae") -> np.ndarray:
        cov = self.var_aae if which == "aae" else self.var_primary
        return np.sqrt(np.clip(np.diag(cov), 0, None))

    def to_dict(self) -> dict:
        return {
            "m": self.m, "n": self.n, "rho": self.rho,
            "omega_hat": self.omega_hat, "gamma_hat": self.gamma_hat, "lambda_hat": self.lambda_hat,
            "j_hat": self.j_hat, "j_check_hat": self.j_check_hat, "cross_hat": self.cross_hat,
            "var_aae": self.var_aae, "var_primary": self.var_primary,
            "dominance_eigs": self.dominance_eigs,
            "omega_condition": self.omega_condition, "lambda_condition": self.lambda_condition,
        }


def _moments(aux, pri, beta, g_model):
    """Weighted moment matrices.

    ``aux`` is ``(features, z, weights)`` and ``pri`` is ``(features, z, y, weights)``;
    weights sum to one within each side.
    """
    ax, az, aw = aux
    px, pz, py, pw = pri
    sigma = np.exp(_log_probs(ax, beta))[..., 1:]
    omega = _mean_curvature(ax, sigma, aw)
    g = g_model.probs(ax, az)
    s = np.einsum("nj,njd->nd", g[:, 1:] - sigma, ax)
    j = _sym((s * aw[:, None]).T @ s)
    mean_x = np.einsum("nj,njd->nd", sigma, ax)
    centred = np.concatenate([np.zeros((len(ax), 1, ax.shape[2])), ax], axis=1) - mean_x[:, None, :]
    jac = g_model.grad_theta(ax, az)
    gamma = np.einsum("n,njd,njq->dq", aw, centred, jac)

    sigma_p = np.exp(_log_probs(px, beta))[..., 1:]
    wv = np.einsum("nj,njd->nd", one_hot(py, px.shape[1])[:, 1:] - sigma_p, px)
    j_check = _sym((wv * pw[:, None]).T @ wv)
    u = g_model.log_score(px, pz, py)
    info = _sym((u * pw[:, None]).T @ u)
    cross = (wv * pw[:, None]).T @ u
    return omega, gamma, info, j, j_check, cross


def _assemble(omega, gamma, info, j, j_check, cross, m, n, max_condition):
    omega_inv, omega_cond = symmetric_inverse(omega, "Omega", max_condition)
    lam, lam_cond = symmetric_inverse(info, "Lambda^-1 (first-stage information)", max_condition)
    gl = gamma @ lam @ gamma.T
    var_aae = _sym(omega_inv @ j @ omega_inv / n + omega_inv @ gl @ omega_inv / m)
    var_p = _sym(omega_inv @ j_check @ omega_inv / m)
    eigs = np.linalg.eigvalsh(_sym(j_check - gl))
    return AsymptoticReport(omega, gamma, lam, j, j_check, cross, m, n, var_aae, var_p, eigs,
                            omega_cond, lam_cond)


def estimate_asymptotics(primary: Dataset, auxiliary: Dataset, beta_hat, g_model,
                         max_condition=MAX_CONDITION) -> AsymptoticReport:
    """Sample plug-ins at the fitted ``(beta_hat, g_model)``.

    ``Omega``, ``Gamma`` and ``J`` average over the auxiliary sample (the
    sample the second-stage objective averages over); ``Jcheck`` and the
    first-stage information average over the primary sample.
    """
    if primary.kind is not DatasetKind.PRIMARY or auxiliary.kind is not DatasetKind.AUXILIARY:
        raise DataValidationError("expected primary and auxiliary datasets")
    m, n = len(primary), len(auxiliary)
    if m < 2 or n < 2:
        raise DataValidationError("need at least two primary and two auxiliary tasks")
    beta = check_beta(beta_hat, auxiliary.d)
    aux = (auxiliary.features, auxiliary.ai_labels, np.full(n, 1.0 / n))
    pri = (primary.features, primary.ai_labels, primary.human_labels, np.full(m, 1.0 / m))
    return _assemble(*_moments(aux, pri, beta, g_model), m, n, max_condition)


def _support_of(world_or_support):
    if isinstance(world_or_support, FiniteSupport):
        return world_or_support
    if isinstance(world_or_support, World):
        if not world_or_support.is_finite:
            raise DataValidationError("exact enumeration needs a finite-support world "
                                      "(pass world.support(draws, seed) for a Monte Carlo support)")
        return world_or_support.support()
    raise DataValidationError(f"expected a World or FiniteSupport, got {type(world_or_support).__name__}")


def population_asymptotics(world_or_support, beta, g_model, m=1, n=1,
                           max_condition=MAX_CONDITION) -> AsymptoticReport:
    """Exact expectations over a finite support (``y`` drawn from the world's law).

    ``m`` and ``n`` only scale the two covariance matrices.
    """
    support = _support_of(world_or_support)
    beta = check_beta(beta, support.d)
    x, z, w, _ = support.xz_rows()
    px, pz, py, pw = support.xzy_rows()
    return _assemble(*_moments((x, z, w), (px, pz, py, pw), beta, g_model), m, n, max_condition)


@dataclass(frozen=True)
class DominanceResult:
    eigenvalues: np.ndarray
    dominant: bool

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0])


def dominance_check(report: AsymptoticReport, tol=DOMINANCE_TOL) -> DominanceResult:
    """Eigenvalues of ``Jcheck - Gamma Lambda Gamma^T``; dominant if all exceed ``tol``."""
    eigs = np.linalg.eigvalsh(report.dominance_matrix)
    return DominanceResult(eigs, bool(eigs[0] > tol))


@dataclass(frozen=True)
class ResidualDecomposition:
    """``E[r r^T] = misspecification_term + z_information_term``.

    ``projection_route`` is ``Jcheck - E[w u^T] E[u u^T]^-1 E[u w^T]`` with
    ``y`` enumerated from g itself; None for parameter-free g.
    """

    total: np.ndarray
    misspecification_term: np.ndarray
    z_information_term: np.ndarray
    projection_route: np.ndarray | None = None

    @property
    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.total)[0])


def residual_decomposition(world_or_support, beta_star, g_star, projection=True) -> ResidualDecomposition:
    """Enumerate ``r(x, z) = sum_j (sigma_j(x; beta) - g_j(x, z)) x_(j)`` and its split.

    ``P(y | x)`` in both terms is the g-implied marginal ``E_z[g(x, z) | x]``,
    which makes the split exact; for the true g it is the world's law.
    """
    support = _support_of(world_or_support)
    beta = check_beta(beta_star, support.d)
    x, z, w, idx = support.xz_rows()
    sigma = np.exp(_log_probs(x, beta))[:, 1:]
    g = g_star.probs(x, z)
    zw = support.z_probs[idx, z]
    marginal = np.zeros((len(support.probs), support.k + 1))
    np.add.at(marginal, idx, zw[:, None] * g)
    pbar = marginal[idx][:, 1:]
    r = np.einsum("nj,njd->nd", sigma - g[:, 1:], x)
    mis = np.einsum("nj,njd->nd", sigma - pbar, x)
    info = np.einsum("nj,njd->nd", g[:, 1:] - pbar, x)

    def second(v):
        return _sym((v * w[:, None]).T @ v)

    route = None
    if projection and getattr(g_star, "n_params", 0) > 0:
        k1 = support.k + 1
        rows = np.repeat(np.arange(len(z)), k1)
        y = np.tile(np.arange(k1), len(z))
        yw = (w[:, None] * g).ravel()
        px, pz = x[rows], z[rows]
        wv = np.einsum("nj,njd->nd", one_hot(y, support.k)[:, 1:] - sigma[rows], px)
        u = g_star.log_score(px, pz, y)
        j_check = _sym((wv * yw[:, None]).T @ wv)
        cross = (wv * yw[:, None]).T @ u
        info_inv, _ = symmetric_inverse((u * yw[:, None]).T @ u, "E[u u^T]")
        route = _sym(j_check - cross @ info_inv @ cross.T)
    return ResidualDecomposition(second(r), second(mis), second(info), route)


def confidence_intervals(beta_hat, covariance, level=0.95) -> np.ndarray:
    """Per-coordinate normal intervals, ``(d, 2)``."""
    half = stats.norm.ppf(0.5 + level / 2) * np.sqrt(np.clip(np.diag(covariance), 0, None))
    beta_hat = np.asarray(beta_hat, dtype=float)
    return np.column_stack([beta_hat - half, beta_hat + half])
