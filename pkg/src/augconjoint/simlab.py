"""Synthetic data-generating processes with oracle access to the truth.

A world specifies a feature law, an AI-label law ``P(z | x)`` and a human
choice law ``P(y | x, z)``. Worlds with a finite feature support expose an
exact :class:`FiniteSupport`; continuous worlds approximate population
expectations with a fixed, seeded draw of feature points.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .choice import Dataset, DatasetKind, FitOptions, _log_probs, fit_mnl
from .errors import DataValidationError
from .gmodels import FixedG, MlpOptions, ParametricG

logger = logging.getLogger(__name__)

DEFAULT_EXPECTATION_DRAWS = 100_000
ORACLE_OPTIONS = FitOptions(tol=1e-10)
# lower bound on P(y = j | x) below which identification is considered fragile
CHOICE_PROB_FLOOR = 1e-6


def derive_seed(master_seed, *keys) -> np.random.SeedSequence:
    """Child seed for ``keys`` (e.g. a replication index), independent of call order."""
    return np.random.SeedSequence([int(master_seed), *(int(k) for k in keys)])


def rng_for(master_seed, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *keys))


def sample_categorical(rng, probs) -> np.ndarray:
    """One draw per row of ``probs`` (rows sum to one)."""
    probs = np.asarray(probs)
    u = rng.random(probs.shape[:-1])
    cdf = np.cumsum(probs, axis=-1)
    return np.minimum((cdf < u[..., None] * cdf[..., -1:]).sum(axis=-1), probs.shape[-1] - 1)


@dataclass(frozen=True, eq=False)
class FiniteSupport:
    """A discrete population over tasks.

    Attributes:
        features: ``(S, k, d)`` support points.
        probs: ``(S,)`` probabilities of the support points.
        z_probs: ``(S, k + 1)`` AI-label law per support point.
        y_probs: ``(S, k + 1, k + 1)``; ``y_probs[s, z, y] = P(y | x_s, z)``.
    """

    features: np.ndarray
    probs: np.ndarray
    z_probs: np.ndarray
    y_probs: np.ndarray

    def __post_init__(self):
        for name in ("features", "probs", "z_probs", "y_probs"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        x = self.features
        if x.ndim != 3:
            raise DataValidationError(f"support features must be (S, k, d), got shape {x.shape}")
        s, k, _ = x.shape
        checks = [
            (np.asarray(self.probs).shape == (s,), "probs"),
            (np.asarray(self.z_probs).shape == (s, k + 1), "z_probs"),
            (np.asarray(self.y_probs).shape == (s, k + 1, k + 1), "y_probs"),
        ]
        for ok, name in checks:
            if not ok:
                raise DataValidationError(f"{name} has the wrong shape for {s} support points with k={k}")
        for name, arr, axis in (("probs", self.probs, None), ("z_probs", self.z_probs, -1),
                                ("y_probs", self.y_probs, -1)):
            arr = np.asarray(arr, dtype=float)
            if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=axis) - 1.0) > 1e-9):
                raise DataValidationError(f"{name} must be probability vectors")

    @property
    def k(self) -> int:
        return self.features.shape[1]

    @property
    def d(self) -> int:
        return self.features.shape[2]

    def y_marginal(self) -> np.ndarray:
        """``P(y | x_s)`` for each support point, ``(S, k + 1)``."""
        return np.einsum("sz,szy->sy", self.z_probs, self.y_probs)

    def xz_rows(self):
        """Flatten to ``(features, z, weight)`` over pairs ``(s, z)`` with positive mass."""
        s, k1 = self.z_probs.shape
        w = (self.probs[:, None] * self.z_probs).ravel()
        keep = w > 0
        idx = np.repeat(np.arange(s), k1)[keep]
        z = np.tile(np.arange(k1), s)[keep]
        return self.features[idx], z, w[keep], idx

    def xzy_rows(self):
        """Flatten to ``(features, z, y, weight)`` over triples ``(s, z, y)`` with positive mass."""
        x, z, w, idx = self.xz_rows()
        k1 = self.k + 1
        py = self.y_probs[idx, z]
        ww = (w[:, None] * py).ravel()
        keep = ww > 0
        rows = np.repeat(np.arange(len(z)), k1)[keep]
        y = np.tile(np.arange(k1), len(z))[keep]
        return x[rows], z[rows], y, ww[keep]


class World:
    """Base class: subclasses provide the laws and a feature sampler."""

    k: int
    d: int

    def z_probs(self, features) -> np.ndarray:
        raise NotImplementedError

    def y_probs(self, features, z) -> np.ndarray:
        raise NotImplementedError

    def sample_features(self, rng, size) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_finite(self) -> bool:
        return False

    def support(self, draws=DEFAULT_EXPECTATION_DRAWS, seed=0) -> FiniteSupport:
        """Exact support for finite worlds, a seeded equal-weight draw otherwise."""
        x = self.sample_features(np.random.default_rng(seed), draws)
        return self.support_at(x)

    def support_at(self, x, probs=None) -> FiniteSupport:
        """Support made of the given feature points (equal weights by default)."""
        x = np.asarray(x, dtype=float)
        probs = np.full(len(x), 1.0 / len(x)) if probs is None else np.asarray(probs, dtype=float)
        k1 = x.shape[1] + 1
        zp = self.z_probs(x)
        yp = np.stack([self.y_probs(x, np.full(len(x), z)) for z in range(k1)], axis=1)
        return FiniteSupport(x, probs, zp, yp)

    def true_g(self):
        """A g model equal to the world's ``P(y | x, z)``."""
        return FixedG(self.y_probs)

    def sample(self, rng, size):
        """Draw ``size`` i.i.d. tasks; returns ``(features, z, y)``."""
        x = self.sample_features(rng, size)
        z = sample_categorical(rng, self.z_probs(x)) if size else np.zeros(0, dtype=np.int64)
        y = sample_categorical(rng, self.y_probs(x, z)) if size else np.zeros(0, dtype=np.int64)
        return x, z, y


class FiniteSupportWorld(World):
    """World defined directly by a :class:`FiniteSupport`."""

    def __init__(self, support: FiniteSupport):
        self._support = support
        self.k, self.d = support.k, support.d

    @property
    def is_finite(self) -> bool:
        return True

    def support(self, draws=None, seed=None) -> FiniteSupport:
        return self._support

    def _lookup(self, features):
        # map feature rows back to support indices
        s = self._support
        diff = np.abs(features[:, None] - s.features[None]).reshape(len(features), len(s.probs), -1).max(axis=-1)
        idx = diff.argmin(axis=1)
        if len(features) and diff[np.arange(len(features)), idx].max() > 0:
            raise DataValidationError("features are not on the world's support")
        return idx

    def z_probs(self, features):
        return self._support.z_probs[self._lookup(np.asarray(features, dtype=float))]

    def y_probs(self, features, z):
        return self._support.y_probs[self._lookup(np.asarray(features, dtype=float)), np.asarray(z)]

    def sample(self, rng, size):
        s = self._support
        idx = sample_categorical(rng, s.probs[None].repeat(size, axis=0)) if size else np.zeros(0, dtype=np.int64)
        z = sample_categorical(rng, s.z_probs[idx]) if size else np.zeros(0, dtype=np.int64)
        y = sample_categorical(rng, s.y_probs[idx, z]) if size else np.zeros(0, dtype=np.int64)
        return s.features[idx], z, y


class SingleProductWorld(FiniteSupportWorld):
    """One product, no attributes: ``P(z = 1) = alpha`` and ``P(y = z) = p``.

    Encoded with ``k = d = 1`` and the constant feature ``x_(1) = [1]``, so the
    coefficient is an intercept.
    """

    def __init__(self, alpha, p):
        if not (0 < alpha < 1 and 0 < p < 1):
            raise DataValidationError(f"single-product world needs alpha, p in (0, 1); got alpha={alpha}, p={p}")
        self.alpha, self.p = float(alpha), float(p)
        support = FiniteSupport(
            np.ones((1, 1, 1)), np.ones(1), np.array([[1 - alpha, alpha]]),
            np.array([[[p, 1 - p], [1 - p, p]]]))
        super().__init__(support)

    def true_g(self):
        # saturated: theta_check sets P(y=1 | z=0), eta shifts it to p when z=1
        return ParametricG([_logit(1 - self.p)], _logit(self.p) - _logit(1 - self.p))

    def __repr__(self):
        return f"SingleProductWorld(alpha={self.alpha}, p={self.p})"


class AlignmentWorld(World):
    """Parametric world: AI labels follow a logit in ``zeta`` over the inside
    alternatives, human choices follow ``ParametricG(theta_check, eta)``.

    Features are i.i.d. ``U[-1, 1]`` per component unless a finite support
    (``support_features`` with ``support_probs``) is given.
    """

    def __init__(self, theta_check, zeta, eta, k=2, support_features=None, support_probs=None):
        self.theta_check = np.array(theta_check, dtype=float)
        self.zeta = np.array(zeta, dtype=float)
        self.eta = float(eta)
        self.d = self.theta_check.size
        if self.zeta.shape != self.theta_check.shape:
            raise DataValidationError("theta_check and zeta must have the same length")
        self.g = ParametricG(self.theta_check, self.eta)
        if support_features is not None:
            sf = np.array(support_features, dtype=float)
            if sf.ndim != 3 or sf.shape[2] != self.d:
                raise DataValidationError(f"support features must be (S, k, {self.d})")
            sp = np.full(len(sf), 1.0 / len(sf)) if support_probs is None else np.asarray(support_probs, float)
            self.k = sf.shape[1]
            self._finite = self.support_at(sf, sp)
        else:
            self.k = int(k)
            self._finite = None

    @classmethod
    def random(cls, rng, eta, k=2, d=5, support_size=None, coef_range=2.0):
        """Draw ``theta_check, zeta ~ U[-2, 2]`` (and a random finite support if requested)."""
        theta = rng.uniform(-coef_range, coef_range, d)
        zeta = rng.uniform(-coef_range, coef_range, d)
        if support_size is None:
            return cls(theta, zeta, eta, k=k)
        feats = rng.uniform(-1, 1, size=(support_size, k, d))
        probs = rng.dirichlet(np.ones(support_size))
        return cls(theta, zeta, eta, support_features=feats, support_probs=probs)

    @property
    def is_finite(self) -> bool:
        return self._finite is not None

    def support(self, draws=DEFAULT_EXPECTATION_DRAWS, seed=0) -> FiniteSupport:
        if self._finite is not None:
            return self._finite
        return super().support(draws, seed)

    def sample_features(self, rng, size):
        if self._finite is not None:
            idx = sample_categorical(rng, np.broadcast_to(self._finite.probs, (size, len(self._finite.probs))))
            return self._finite.features[idx]
        return rng.uniform(-1.0, 1.0, size=(size, self.k, self.d))

    def z_probs(self, features):
        u = np.asarray(features, dtype=float) @ self.zeta
        u -= u.max(axis=-1, keepdims=True)
        e = np.exp(u)
        inside = e / e.sum(axis=-1, keepdims=True)
        return np.concatenate([np.zeros(inside.shape[:-1] + (1,)), inside], axis=-1)

    def y_probs(self, features, z):
        return self.g.probs(features, z)

    def true_g(self):
        return self.g

    def __repr__(self):
        return (f"AlignmentWorld(theta_check={self.theta_check.tolist()}, zeta={self.zeta.tolist()}, "
                f"eta={self.eta}, k={self.k}, finite={self.is_finite})")


class MisalignedWorld(World):
    """Well-specified human logit with a systematically distorted AI label.

    Humans choose by the logit in ``beta`` (so ``beta`` is the best-in-class
    coefficient). With probability ``1 - delta`` the AI label reports the
    human choice relabelled by ``permutation`` (identity by default: a faithful
    copy); otherwise it draws from the logit in ``zeta``, outside option
    included. Features are i.i.d. ``U[-1, 1]``; with ``intercept=True`` the
    first feature is the constant 1.
    """

    def __init__(self, beta, zeta, delta, k=2, permutation=None, intercept=False):
        self.beta = np.array(beta, dtype=float)
        self.zeta = np.array(zeta, dtype=float)
        self.delta = float(delta)
        self.k = int(k)
        self.d = self.beta.size
        self.intercept = bool(intercept)
        if self.zeta.shape != self.beta.shape:
            raise DataValidationError("beta and zeta must have the same length")
        if not 0.0 <= self.delta <= 1.0:
            raise DataValidationError("delta must lie in [0, 1]")
        perm = np.arange(self.k + 1) if permutation is None else np.asarray(permutation, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.k + 1)):
            raise DataValidationError(f"permutation must rearrange 0..{self.k}")
        self.permutation = perm

    def sample_features(self, rng, size):
        x = rng.uniform(-1.0, 1.0, size=(size, self.k, self.d))
        if self.intercept:
            x[..., 0] = 1.0
        return x

    def _laws(self, features):
        x = np.asarray(features, dtype=float)
        return np.exp(_log_probs(x, self.beta)), np.exp(_log_probs(x, self.zeta))

    def z_probs(self, features):
        py, pz = self._laws(features)
        copied = np.zeros_like(py)
        copied[..., self.permutation] = py
        return (1.0 - self.delta) * copied + self.delta * pz

    def y_probs(self, features, z):
        py, pz = self._laws(features)
        z = np.asarray(z)
        hit = self.permutation == z[..., None]
        post = py * ((1.0 - self.delta) * hit + self.delta * np.take_along_axis(pz, z[..., None], -1))
        return post / post.sum(axis=-1, keepdims=True)

    def __repr__(self):
        return (f"MisalignedWorld(beta={self.beta.tolist()}, zeta={self.zeta.tolist()}, delta={self.delta}, "
                f"k={self.k}, permutation={self.permutation.tolist()}, intercept={self.intercept})")


# the default step size barely moves the network in 2000 epochs at m = 100
BENCHMARK_MLP_OPTIONS = MlpOptions(learning_rate=1e-2)


def benchmark_world() -> MisalignedWorld:
    """Misaligned benchmark world: the AI label names the human's choice but
    swaps the two inside alternatives, so pooling it as a human label is
    badly biased while a flexible g recovers the human choice exactly."""
    return MisalignedWorld([1.0, -1.0, 0.5], [0.0, 0.0, 0.0], 0.0, k=2, permutation=[0, 2, 1])


def _logit(q):
    return math.log(q / (1.0 - q))


def sample_dataset(world: World, m: int, n: int, seed) -> tuple[Dataset, Dataset]:
    """Draw ``m`` primary tasks (``y`` and ``z``) then ``n`` auxiliary tasks (``z`` only)."""
    if m < 0 or n < 0:
        raise DataValidationError("sample sizes must be nonnegative")
    rng = np.random.default_rng(seed)
    x, z, y = world.sample(rng, m)
    primary = Dataset(x.reshape(m, world.k, world.d), DatasetKind.PRIMARY, z, y)
    x, z, _ = world.sample(rng, n)
    auxiliary = Dataset(x.reshape(n, world.k, world.d), DatasetKind.AUXILIARY, z)
    return primary, auxiliary


def population_beta(support: FiniteSupport, options: FitOptions | None = None, init=None) -> np.ndarray:
    """Maximizer of ``E_x[sum_j P(y = j | x) log sigma_j(x; beta)]`` over a support."""
    opts = options or ORACLE_OPTIONS
    if init is not None:
        opts = FitOptions(**{**opts.__dict__, "init": tuple(np.asarray(init, dtype=float))})
    target = support.y_marginal()
    weight = support.probs
    keep = weight > 0
    if target[keep][:, 1:].min() < CHOICE_PROB_FLOOR:
        warnings.warn(f"some P(y = j | x) fall below {CHOICE_PROB_FLOOR:g}", RuntimeWarning, stacklevel=2)
    target = target / target.sum(axis=-1, keepdims=True)
    return fit_mnl(support.features[keep], target[keep], opts, weights=weight[keep])


def oracle_beta_star(world: World, draws=DEFAULT_EXPECTATION_DRAWS, seed=0, options=None) -> np.ndarray:
    """Best-in-class logit coefficients of a world.

    Exact for finite supports; otherwise the population expectation is
    replaced by ``draws`` seeded feature draws.
    """
    return population_beta(world.support(draws, seed), options)


@dataclass(frozen=True)
class SingleProductLimits:
    beta_star: float
    naive_limit: float


def single_product_oracle(alpha, p, rho) -> SingleProductLimits:
    """Closed-form limits in the single-product world.

    ``beta_star = logit(q)`` with ``q = alpha p + (1 - alpha)(1 - p)``; the
    pooled estimator converges to ``logit((alpha rho + q) / (1 + rho))``
    when ``n / m -> rho``.
    """
    if not (0 < alpha < 1 and 0 < p < 1):
        raise DataValidationError("alpha and p must lie strictly inside (0, 1)")
    if rho < 0 or not math.isfinite(rho):
        raise DataValidationError("rho must be finite and nonnegative")
    q = alpha * p + (1 - alpha) * (1 - p)
    return SingleProductLimits(_logit(q), _logit(alpha * rho / (1 + rho) + q / (1 + rho)))
