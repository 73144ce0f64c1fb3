import math

import numpy as np
import pytest
from scipy import stats

from augconjoint.choice import mnl_probs, soft_loglik, soft_score
from augconjoint.errors import DataValidationError
from augconjoint.estimators import fit_baseline
from augconjoint.simlab import (
    AlignmentWorld,
    SingleProductWorld,
    FiniteSupport,
    MisalignedWorld,
    benchmark_world,
    derive_seed,
    single_product_oracle,
    oracle_beta_star,
    population_beta,
    rng_for,
    sample_categorical,
    sample_dataset,
)


def test_sampling_is_deterministic():
    for world in (SingleProductWorld(0.3, 0.8), AlignmentWorld([1.0, -1.0], [0.5, 0.5], 2.0), benchmark_world()):
        a = sample_dataset(world, 50, 80, seed=3)
        b = sample_dataset(world, 50, 80, seed=3)
        assert a == b
        assert a[0].features.tobytes() == b[0].features.tobytes()
        assert a != sample_dataset(world, 50, 80, seed=4)


def test_seed_derivation_is_order_free():
    a = rng_for(7, 3).random(4)
    rng_for(7, 1).random(100)
    assert np.array_equal(a, rng_for(7, 3).random(4))
    assert derive_seed(7, 3).entropy == derive_seed(7, 3).entropy
    assert not np.array_equal(a, rng_for(7, 4).random(4))


def test_sample_categorical_frequencies():
    rng = np.random.default_rng(0)
    p = np.array([0.1, 0.2, 0.7])
    draws = sample_categorical(rng, np.tile(p, (100_000, 1)))
    counts = np.bincount(draws, minlength=3)
    assert stats.chisquare(counts, 100_000 * p).pvalue > 0.01


def test_single_product_z_frequency_in_clt_band():
    primary, _ = sample_dataset(SingleProductWorld(0.3, 0.8), 100_000, 0, seed=1)
    assert abs((primary.ai_labels == 1).mean() - 0.3) < 4 * math.sqrt(0.3 * 0.7 / 1e5)
    assert abs((primary.human_labels == primary.ai_labels).mean() - 0.8) < 4 * math.sqrt(0.8 * 0.2 / 1e5)


def test_alignment_world_y_frequencies_match_g():
    world = AlignmentWorld.random(np.random.default_rng(3), 1.5, d=3, support_size=3)
    primary, _ = sample_dataset(world, 100_000, 0, seed=3)
    sup = world.support()
    cells = {tuple(t.ravel()): s for s, t in enumerate(sup.features)}
    cell = np.array([cells[tuple(t.ravel())] for t in primary.features])
    observed, expected = [], []
    for s in range(3):
        for z in (1, 2):
            mask = (cell == s) & (primary.ai_labels == z)
            observed.append(np.bincount(primary.human_labels[mask], minlength=3))
            expected.append(mask.sum() * world.g.probs(sup.features[s], z))
    observed, expected = np.concatenate(observed), np.concatenate(expected)
    chi2 = ((observed - expected) ** 2 / expected).sum()
    dof = len(observed) - 6
    assert stats.chi2.sf(chi2, dof) > 0.01


def test_alignment_world_z_law_has_no_outside_option():
    world = AlignmentWorld([1.0, -1.0], [0.5, 2.0], 1.0, k=3)
    x = np.random.default_rng(0).uniform(-1, 1, size=(10, 3, 2))
    zp = world.z_probs(x)
    np.testing.assert_array_equal(zp[:, 0], 0.0)
    np.testing.assert_allclose(zp[:, 1:], [mnl_probs(t, world.zeta)[1:] / mnl_probs(t, world.zeta)[1:].sum()
                                           for t in x], rtol=1e-12)


def test_oracle_single_product_against_grid():
    world = SingleProductWorld(0.3, 0.8)
    b = oracle_beta_star(world)[0]
    assert b == pytest.approx(math.log(0.38 / 0.62), abs=1e-10)
    grid = np.arange(-3, 3, 1e-4)
    q = 0.38
    obj = q * grid - np.log1p(np.exp(grid))
    assert abs(grid[np.argmax(obj)] - b) <= 1e-4


def test_oracle_half_alpha_is_zero():
    for p in (0.1, 0.6, 0.9):
        assert oracle_beta_star(SingleProductWorld(0.5, p))[0] == pytest.approx(0.0, abs=1e-12)


def test_oracle_well_specified_alignment_world():
    world = AlignmentWorld([0.7, -1.2, 0.4], [1.0, 0.0, -1.0], 0.0)
    np.testing.assert_allclose(oracle_beta_star(world, draws=5000), world.theta_check, atol=1e-9)


def test_oracle_first_order_condition():
    world = AlignmentWorld.random(np.random.default_rng(11), 3.0, d=3)
    sup = world.support(20_000, seed=1)
    beta = population_beta(sup)
    score = np.einsum("s,sd->d", sup.probs, soft_score(sup.features, sup.y_marginal(), beta))
    assert np.max(np.abs(score)) < 1e-8
    # and it maximizes: no random perturbation does better
    target = sup.y_marginal()
    best = soft_loglik(sup.features, target, beta, sup.probs)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert soft_loglik(sup.features, target, beta + 0.01 * rng.normal(size=3), sup.probs) < best


def test_single_product_oracle_values():
    lim = single_product_oracle(0.3, 0.8, 1.0)
    assert lim.beta_star == pytest.approx(-0.4895, abs=1e-4)
    assert lim.naive_limit == pytest.approx(-0.6633, abs=1e-4)
    lim = single_product_oracle(0.5, 0.8, 1.0)
    assert lim.beta_star == lim.naive_limit == pytest.approx(0.0, abs=1e-15)
    gaps = [abs(single_product_oracle(0.3, 1 - e, 2.0).naive_limit - single_product_oracle(0.3, 1 - e, 2.0).beta_star)
            for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(a > b for a, b in zip(gaps, gaps[1:])) and gaps[-1] < 1e-3
    for bad in ((0.0, 0.8, 1.0), (0.3, 1.0, 1.0), (0.3, 0.8, -1.0)):
        with pytest.raises(DataValidationError):
            single_product_oracle(*bad)


def test_single_product_naive_limit_by_brute_force():
    primary, auxiliary = sample_dataset(SingleProductWorld(0.3, 0.8), 500_000, 500_000, seed=12)
    b = fit_baseline(primary, auxiliary, "naive").beta_hat[0]
    assert b == pytest.approx(single_product_oracle(0.3, 0.8, 1.0).naive_limit, abs=0.01)


def test_world_parameter_validation():
    with pytest.raises(DataValidationError):
        SingleProductWorld(1.0, 0.5)
    with pytest.raises(DataValidationError):
        AlignmentWorld([1.0, 2.0], [1.0], 1.0)
    with pytest.raises(DataValidationError):
        MisalignedWorld([1.0], [0.0], 1.5)
    with pytest.raises(DataValidationError):
        MisalignedWorld([1.0], [0.0], 0.0, permutation=[0, 0, 1])
    with pytest.raises(DataValidationError):
        FiniteSupport(np.zeros((1, 1, 1)), [1.0], [[0.5, 0.6]], [[[1.0, 0.0], [0.0, 1.0]]])


def test_misaligned_world_is_bayes_consistent():
    world = MisalignedWorld([1.0, -0.5], [0.3, 0.3], 0.25, k=2, permutation=[0, 2, 1])
    x = np.random.default_rng(1).uniform(-1, 1, size=(20, 2, 2))
    pz = world.z_probs(x)
    joint = np.stack([pz[:, z, None] * world.y_probs(x, np.full(20, z)) for z in range(3)], axis=1)
    # summing out z recovers the human logit, whose coefficients are the best-in-class ones
    np.testing.assert_allclose(joint.sum(axis=1), [mnl_probs(t, world.beta) for t in x], atol=1e-12)
    assert oracle_beta_star(world, draws=2000) == pytest.approx(world.beta, abs=1e-9)


def test_benchmark_world_swaps_inside_alternatives():
    world = benchmark_world()
    primary, _ = sample_dataset(world, 2000, 0, seed=0)
    swap = np.array([0, 2, 1])
    np.testing.assert_array_equal(primary.ai_labels, swap[primary.human_labels])
