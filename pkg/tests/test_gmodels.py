import math

import numpy as np
import pytest

from augconjoint.choice import ChoiceTask, Dataset, mnl_probs, one_hot
from augconjoint.errors import DataValidationError, NumericalError
from augconjoint.gmodels import (
    FixedG,
    MlpG,
    MlpOptions,
    ParametricG,
    augment_features,
    fit_g,
    g_grad_theta,
    g_probs,
    mlp_loss,
)
from augconjoint.simlab import AlignmentWorld, SingleProductWorld, sample_dataset

from conftest import central_diff, rel_err


def _random_mlp(rng, k, d):
    return MlpG.initialize(k, d, rng, scale=1.0)


# -- probabilities -------------------------------------------------------------------------------


def test_parametric_eta_zero_matches_mnl(rng):
    theta = rng.normal(size=3)
    x = rng.normal(size=(2, 3))
    g = ParametricG(theta, 0.0)
    for z in range(3):
        np.testing.assert_allclose(g.probs(x, z), mnl_probs(x, theta), atol=1e-15)


def test_parametric_direct_evaluation():
    g = ParametricG([0.0], math.log(2))
    np.testing.assert_allclose(g_probs(g, ChoiceTask([[1.0], [2.0]], ai_label=1)), [0.25, 0.5, 0.25], atol=1e-15)


def test_zero_mlp_is_uniform(rng):
    g = MlpG.zeros(3, 2)
    np.testing.assert_allclose(g.probs(rng.normal(size=(5, 3, 2)), rng.integers(0, 4, size=5)), 0.25, atol=1e-15)


def test_probs_are_strict_simplex_for_both_variants(rng):
    x = rng.normal(size=(50, 3, 2))
    z = rng.integers(0, 4, size=50)
    for g in (ParametricG(rng.normal(scale=5, size=2), 8.0), _random_mlp(rng, 3, 2)):
        p = g.probs(x, z)
        assert np.all(p > 0)
        np.testing.assert_allclose(p.sum(-1), 1.0, atol=1e-12)


def test_g_requires_ai_label_and_matching_dims(rng):
    g = ParametricG([0.0, 1.0], 1.0)
    with pytest.raises(DataValidationError):
        g_probs(g, ChoiceTask(np.zeros((2, 2))))
    with pytest.raises(DataValidationError):
        g.probs(np.zeros((2, 3)), 1)
    with pytest.raises(DataValidationError):
        g.probs(np.zeros((2, 2)), 3)


def test_z_zero_never_hits_an_alternative():
    xa = augment_features(np.zeros((2, 1)), 0)
    np.testing.assert_array_equal(xa[:, -1], 0.0)


# -- gradients -----------------------------------------------------------------------------------


def test_eta_gradient_at_uniform():
    g = ParametricG([0.0], 0.0)
    jac = g_grad_theta(g, ChoiceTask([[1.0], [1.0]], ai_label=1), j=1)
    assert jac[-1] == pytest.approx(2 / 9, abs=1e-15)


def test_parametric_jacobian_matches_finite_differences(rng):
    for _ in range(100):
        k, d = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        x = rng.normal(size=(k, d))
        z = int(rng.integers(0, k + 1))
        theta = np.append(rng.normal(size=d), rng.normal())
        fd = central_diff(lambda t: ParametricG.from_params(t).probs(x, z), theta, h=1e-6)
        assert rel_err(ParametricG.from_params(theta).grad_theta(x, z), fd) < 1e-6


def test_mlp_jacobian_matches_finite_differences(rng):
    for _ in range(100):
        k, d = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        x = rng.normal(size=(k, d))
        z = int(rng.integers(0, k + 1))
        model = _random_mlp(rng, k, d)
        fd = central_diff(lambda t: model.with_params(t).probs(x, z), model.params, h=1e-6)
        assert rel_err(model.grad_theta(x, z), fd) < 1e-5


def test_log_score_is_gradient_of_log_probability(rng):
    x = rng.normal(size=(2, 3))
    for model in (ParametricG(rng.normal(size=3), 0.7), _random_mlp(rng, 2, 3)):
        for y in range(3):
            def f(t, y=y):
                m = model.with_params(t) if isinstance(model, MlpG) else ParametricG.from_params(t)
                return np.log(m.probs(x, 1)[y])
            np.testing.assert_allclose(model.log_score(x, 1, y), central_diff(f, model.params, h=1e-6), atol=1e-7)


def test_fixed_g_has_no_parameters(rng):
    g = FixedG(lambda x, z: mnl_probs(x, np.ones(x.shape[-1])))
    x = rng.normal(size=(4, 2, 2))
    assert g.n_params == 0
    assert g.grad_theta(x, np.ones(4, int)).shape == (4, 3, 0)


# -- fitting -------------------------------------------------------------------------------------


def test_parametric_self_recovery():
    world = AlignmentWorld([0.5, -1.0], [1.0, 0.5], 1.5)
    primary, _ = sample_dataset(world, 20_000, 0, seed=11)
    g = fit_g(primary)
    np.testing.assert_allclose(g.params, [0.5, -1.0, 1.5], atol=0.1)


def test_independent_z_gives_zero_eta(rng):
    x = rng.uniform(-1, 1, size=(20_000, 2, 2))
    theta = np.array([0.5, -1.0])
    y = np.array([rng.choice(3, p=mnl_probs(t, theta)) for t in x])
    z = rng.integers(1, 3, size=len(y))
    g = fit_g(Dataset(x, "primary", z, y))
    assert abs(g.eta) < 0.1


def test_single_product_fitted_g_matches_conditional_frequencies():
    world = SingleProductWorld(0.3, 0.8)
    primary, _ = sample_dataset(world, 20_000, 0, seed=5)
    g = fit_g(primary)
    for z, target in ((1, 0.8), (0, 0.2)):
        mask = primary.ai_labels == z
        freq = (primary.human_labels[mask] == 1).mean()
        fitted = g.probs(np.ones((1, 1)), z)[1]
        # saturated model: the MLE equals the empirical conditional frequency
        assert fitted == pytest.approx(freq, abs=1e-8)
        assert abs(fitted - target) < 4 * math.sqrt(target * (1 - target) / mask.sum())


def test_parametric_fit_permutation_invariant():
    world = AlignmentWorld([0.5, -1.0], [1.0, 0.5], 1.0)
    primary, _ = sample_dataset(world, 500, 0, seed=2)
    perm = np.random.default_rng(0).permutation(500)
    a = fit_g(primary).params
    b = fit_g(primary.subset(perm)).params
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_parametric_loglik_concave_along_segments(rng):
    world = AlignmentWorld([0.5, -1.0], [1.0, 0.5], 1.0)
    primary, _ = sample_dataset(world, 300, 0, seed=3)

    def ll(theta):
        return -mlp_loss(ParametricG.from_params(theta), primary.features, primary.ai_labels, primary.human_labels)

    for _ in range(50):
        a, b = rng.normal(scale=3, size=3), rng.normal(scale=3, size=3)
        lam = rng.random()
        assert ll(lam * a + (1 - lam) * b) >= lam * ll(a) + (1 - lam) * ll(b) - 1e-10


def test_mlp_training_loss_non_increasing():
    world = AlignmentWorld([0.5, -1.0], [1.0, 0.5], 2.0)
    primary, _ = sample_dataset(world, 200, 0, seed=4)
    g = fit_g(primary, "mlp", MlpOptions(epochs=500))
    hist = np.array(g.loss_history)
    assert np.all(np.diff(hist) <= 1e-6)
    assert hist[-1] < hist[0]


def test_mlp_fit_deterministic_given_seed():
    world = AlignmentWorld([0.5, -1.0], [1.0, 0.5], 2.0)
    primary, _ = sample_dataset(world, 300, 0, seed=4)
    opts = MlpOptions(epochs=50, seed=9)
    assert fit_g(primary, "mlp", opts).params.tobytes() == fit_g(primary, "mlp", opts).params.tobytes()


def test_fit_g_rejects_auxiliary_and_unknown_variant():
    x = np.zeros((3, 1, 1))
    with pytest.raises(DataValidationError):
        fit_g(Dataset(x, "auxiliary", [0, 1, 0]))
    with pytest.raises(DataValidationError):
        fit_g(Dataset(x + 1, "primary", [0, 1, 0], [0, 1, 1]), "forest")


def test_fit_g_warns_when_underdetermined():
    x = np.array([[[1.0, 0.5]], [[-1.0, 0.25]]])
    with pytest.warns(RuntimeWarning, match="2 primary tasks for 3 parameters"):
        try:
            fit_g(Dataset(x, "primary", [0, 1], [0, 1]))
        except NumericalError:
            pass
