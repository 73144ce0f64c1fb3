"""Conditional label models ``g_j(x, z; theta) = P(y = j | x, z)``.

Three families share one duck-typed interface:

* ``probs(features, z)`` -> ``(..., k + 1)`` probability vectors,
* ``grad_theta(features, z)`` -> ``(..., k + 1, q)`` Jacobian of ``g`` in theta,
* ``log_score(features, z, y)`` -> ``(..., q)`` gradient of ``log g_y``,
* ``n_params`` -> ``q``.

:class:`ParametricG` is a logit in which the alternative the AI picked gets
an extra utility bump ``eta``. :class:`MlpG` is a 10-5 sigmoid network with a
softmax head. :class:`FixedG` wraps any probability function and has no
parameters, which zeroes the first-stage terms of the inference.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .choice import (
    Dataset,
    DatasetKind,
    FitOptions,
    as_features,
    check_beta,
    fit_mnl,
    mnl_probs,
    one_hot,
)
from .errors import DataValidationError

logger = logging.getLogger(__name__)


def _z_array(features, z):
    x = as_features(features)
    if z is None:
        raise DataValidationError("an AI label z is required to evaluate g")
    z = np.asarray(z)
    if z.shape != x.shape[:-2]:
        raise DataValidationError(f"z shape {z.shape} does not match features {x.shape}")
    k = x.shape[-2]
    if z.size and (z.min() < 0 or z.max() > k):
        raise DataValidationError(f"z outside 0..{k}")
    return x, z.astype(np.int64)


def augment_features(features, z):
    """Append the indicator column ``1{z == j}`` to every alternative row."""
    x, z = _z_array(features, z)
    k = x.shape[-2]
    hit = (np.arange(1, k + 1) == z[..., None]).astype(float)
    return np.concatenate([x, hit[..., None]], axis=-1)


class ParametricG:
    """Logit in ``(theta_check, eta)`` over augmented features ``(x_(j), 1{z=j})``.

    ``z = 0`` (or any value no alternative matches) leaves every utility at
    ``theta_check . x_(j)``.
    """

    def __init__(self, theta_check, eta):
        self.theta_check = np.array(theta_check, dtype=float).reshape(-1)
        self.eta = float(eta)
        if not np.all(np.isfinite(self.theta_check)) or not np.isfinite(self.eta):
            raise DataValidationError("g parameters must be finite")

    @classmethod
    def from_params(cls, params):
        params = np.asarray(params, dtype=float)
        return cls(params[:-1], params[-1])

    @property
    def params(self) -> np.ndarray:
        return np.append(self.theta_check, self.eta)

    @property
    def n_params(self) -> int:
        return self.theta_check.size + 1

    def _augmented(self, features, z):
        xa = augment_features(features, z)
        check_beta(self.theta_check, xa.shape[-1] - 1)
        return xa

    def probs(self, features, z):
        return mnl_probs(self._augmented(features, z), self.params)

    def grad_theta(self, features, z):
        xa = self._augmented(features, z)
        g = mnl_probs(xa, self.params)
        mean_x = np.einsum("...j,...jq->...q", g[..., 1:], xa)
        centred = np.concatenate([np.zeros(xa.shape[:-2] + (1, xa.shape[-1])), xa], axis=-2) - mean_x[..., None, :]
        return g[..., :, None] * centred

    def log_score(self, features, z, y):
        xa = self._augmented(features, z)
        g = mnl_probs(xa, self.params)
        y = np.asarray(y, dtype=np.int64)
        return np.einsum("...j,...jq->...q", one_hot(y, xa.shape[-2])[..., 1:] - g[..., 1:], xa)

    def __repr__(self):
        return f"ParametricG(theta_check={self.theta_check.tolist()}, eta={self.eta!r})"


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def _softmax(a):
    a = a - a.max(axis=-1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=-1, keepdims=True)


class MlpG:
    """Feed-forward network ``input -> 10 -> 5 -> k + 1`` with sigmoid hidden units.

    The input is the flattened ``k x d`` feature matrix followed by a
    ``k + 1`` one-hot encoding of ``z``. Parameters are stored as
    ``[(W1, b1), (W2, b2), (W3, b3)]`` with ``W`` of shape ``(out, in)``.
    """

    hidden = (10, 5)

    def __init__(self, layers, k, d):
        self.k, self.d = int(k), int(d)
        self.layers = [(np.array(w, dtype=float), np.array(b, dtype=float)) for w, b in layers]
        sizes = self.layer_sizes(k, d)
        for (w, b), (n_in, n_out) in zip(self.layers, zip(sizes[:-1], sizes[1:])):
            if w.shape != (n_out, n_in) or b.shape != (n_out,):
                raise DataValidationError(f"layer shape {w.shape}/{b.shape} does not fit ({n_out}, {n_in})")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise DataValidationError("MLP weights must be finite")
        self.loss_history: list[float] = []

    @classmethod
    def layer_sizes(cls, k, d):
        return (k * d + k + 1, *cls.hidden, k + 1)

    @classmethod
    def initialize(cls, k, d, rng, scale=0.5):
        sizes = cls.layer_sizes(k, d)
        layers = [(rng.uniform(-scale, scale, size=(n_out, n_in)), rng.uniform(-scale, scale, size=n_out))
                  for n_in, n_out in zip(sizes[:-1], sizes[1:])]
        return cls(layers, k, d)

    @classmethod
    def zeros(cls, k, d):
        sizes = cls.layer_sizes(k, d)
        return cls([(np.zeros((o, i)), np.zeros(o)) for i, o in zip(sizes[:-1], sizes[1:])], k, d)

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in self.layers])

    def with_params(self, params) -> "MlpG":
        params = np.asarray(params, dtype=float)
        out, pos = [], 0
        for w, b in self.layers:
            w_new = params[pos:pos + w.size].reshape(w.shape)
            pos += w.size
            out.append((w_new, params[pos:pos + b.size]))
            pos += b.size
        return MlpG(out, self.k, self.d)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in self.layers)

    def encode(self, features, z):
        x, z = _z_array(features, z)
        if x.shape[-2:] != (self.k, self.d):
            raise DataValidationError(f"features shape {x.shape[-2:]} does not match MLP ({self.k}, {self.d})")
        flat = x.reshape(x.shape[:-2] + (self.k * self.d,))
        return np.concatenate([flat, one_hot(z, self.k)], axis=-1)

    def _forward(self, a0):
        (w1, b1), (w2, b2), (w3, b3) = self.layers
        h1 = _sigmoid(a0 @ w1.T + b1)
        h2 = _sigmoid(h1 @ w2.T + b2)
        return h1, h2, _softmax(h2 @ w3.T + b3)

    def probs(self, features, z):
        return self._forward(self.encode(features, z))[2]

    def _backprop(self, a0, h1, h2, delta3):
        # delta3: (..., r, k+1) gradients wrt logits for r stacked outputs
        (_, _), (w2, _), (w3, _) = self.layers
        delta2 = (delta3 @ w3) * (h2 * (1 - h2))[..., None, :]
        delta1 = (delta2 @ w2) * (h1 * (1 - h1))[..., None, :]
        parts = []
        for delta, act in ((delta1, a0), (delta2, h1), (delta3, h2)):
            dw = delta[..., :, None] * act[..., None, None, :]
            parts.append(dw.reshape(dw.shape[:-2] + (-1,)))
            parts.append(delta)
        return np.concatenate(parts, axis=-1)

    def grad_theta(self, features, z):
        a0 = self.encode(features, z)
        h1, h2, g = self._forward(a0)
        jac = g[..., :, None] * (np.eye(self.k + 1) - g[..., None, :])
        return self._backprop(a0, h1, h2, jac)

    def log_score(self, features, z, y):
        a0 = self.encode(features, z)
        h1, h2, g = self._forward(a0)
        delta = one_hot(y, self.k) - g
        return self._backprop(a0, h1, h2, delta[..., None, :])[..., 0, :]

    def __repr__(self):
        return f"MlpG(k={self.k}, d={self.d}, n_params={self.n_params})"


class FixedG:
    """Parameter-free g defined by a probability function ``fn(features, z)``."""

    n_params = 0

    def __init__(self, fn):
        self.fn = fn

    def probs(self, features, z):
        x, z = _z_array(features, z)
        return np.asarray(self.fn(x, z), dtype=float)

    def grad_theta(self, features, z):
        x, z = _z_array(features, z)
        return np.zeros(z.shape + (x.shape[-2] + 1, 0))

    def log_score(self, features, z, y):
        _, z = _z_array(features, z)
        return np.zeros(z.shape + (0,))


# -- task-level wrappers ----------------------------------------------------------------------


def g_probs(model, task, z=None):
    """``g(x, z)`` for a ChoiceTask (uses its ai_label) or for arrays plus ``z``."""
    if z is None and hasattr(task, "ai_label"):
        z = task.ai_label
    if z is None and isinstance(task, Dataset):
        z = task.ai_labels
    return model.probs(as_features(task), z)


def g_grad_theta(model, task, j=None, z=None):
    """Jacobian ``d g_j / d theta``; all ``j`` stacked on axis ``-2`` when ``j`` is None."""
    if z is None and hasattr(task, "ai_label"):
        z = task.ai_label
    if z is None and isinstance(task, Dataset):
        z = task.ai_labels
    jac = model.grad_theta(as_features(task), z)
    return jac if j is None else jac[..., j, :]


@dataclass(frozen=True)
class MlpOptions:
    """Training setup for :class:`MlpG` (full-batch Adam on cross-entropy)."""

    epochs: int = 2000
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    init_scale: float = 0.5
    seed: int = 0


def mlp_loss(model, features, z, y):
    g = model.probs(features, z)
    return float(-np.mean(np.log(np.take_along_axis(g, np.asarray(y)[:, None], axis=-1))))


def _fit_mlp(primary, opts):
    rng = np.random.default_rng(opts.seed)
    model = MlpG.initialize(primary.k, primary.d, rng, opts.init_scale)
    x, z, y = primary.features, primary.ai_labels, primary.human_labels
    a0 = model.encode(x, z)
    theta = model.params
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    history = []
    for epoch in range(1, opts.epochs + 1):
        h1, h2, g = model._forward(a0)
        history.append(float(-np.mean(np.log(g[np.arange(len(y)), y]))))
        delta = (g - one_hot(y, model.k))[:, None, :]
        grad = model._backprop(a0, h1, h2, delta)[:, 0, :].mean(axis=0)
        m1 = opts.beta1 * m1 + (1 - opts.beta1) * grad
        m2 = opts.beta2 * m2 + (1 - opts.beta2) * grad ** 2
        m_hat = m1 / (1 - opts.beta1 ** epoch)
        v_hat = m2 / (1 - opts.beta2 ** epoch)
        theta = theta - opts.learning_rate * m_hat / (np.sqrt(v_hat) + opts.adam_eps)
        model = model.with_params(theta)
    history.append(mlp_loss(model, x, z, y))
    model.loss_history = history
    return model


def fit_g(primary: Dataset, variant="parametric", options=None):
    """Fit the conditional label model on primary data.

    ``variant="parametric"`` maximizes ``sum_i log g_{y_i}(x_i, z_i)`` by
    damped Newton (``options``: FitOptions). ``variant="mlp"`` trains
    :class:`MlpG` by Adam (``options``: MlpOptions).
    """
    if primary.kind is not DatasetKind.PRIMARY:
        raise DataValidationError("fit_g needs primary data (human and AI labels)")
    if len(primary) == 0:
        raise DataValidationError("fit_g needs at least one primary task")
    if variant == "parametric":
        q = primary.d + 1
        if len(primary) < q:
            warnings.warn(f"only {len(primary)} primary tasks for {q} parameters", RuntimeWarning, stacklevel=2)
        xa = augment_features(primary.features, primary.ai_labels)
        theta = fit_mnl(xa, one_hot(primary.human_labels, primary.k), options)
        return ParametricG.from_params(theta)
    if variant == "mlp":
        opts = options or MlpOptions()
        q = sum(o * (i + 1) for i, o in zip(MlpG.layer_sizes(primary.k, primary.d)[:-1],
                                            MlpG.layer_sizes(primary.k, primary.d)[1:]))
        if len(primary) < q:
            warnings.warn(f"only {len(primary)} primary tasks for {q} MLP weights", RuntimeWarning, stacklevel=2)
        return _fit_mlp(primary, opts)
    raise DataValidationError(f"unknown g variant {variant!r}")
