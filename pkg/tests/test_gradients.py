"""Stochastic-gradient correctness: oracle agreement and internal identities."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gmdesign import (
    GaussianComponent,
    GaussianMixture,
    RandomStream,
    batch_gradient,
    build_model,
    component_posterior_norms,
    finite_difference_gradient,
    gradient_workspace,
    mmse_estimate,
    objective_value,
    sample_gradients,
    stochastic_gradient,
)
from helpers import cluster_model, literal_gradient, random_instance


def rel_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def test_all_zero_instance_gives_zero_gradient():
    mix = GaussianMixture([GaussianComponent(1.0, np.zeros(2), np.eye(2))])
    model = build_model(np.zeros((2, 2)), mix, mix)
    grad = stochastic_gradient(model, np.zeros(2), np.zeros(2))
    assert_allclose(grad, np.zeros((2, 2)), atol=1e-15)


def test_matches_finite_differences_random_instances():
    rng = np.random.default_rng(100)
    worst = 0.0
    for _ in range(25):
        transfer, xmix, nmix = random_instance(rng)
        x, _ = xmix.sample(rng)
        n, _ = nmix.sample(rng)
        model = build_model(transfer, xmix, nmix)
        closed = stochastic_gradient(model, x, n)
        fd = finite_difference_gradient(
            lambda p: build_model(p, xmix, nmix), transfer, x, n
        )
        worst = max(worst, rel_error(closed, fd))
    assert worst < 1e-5


def test_matches_literal_raw_density_form():
    rng = np.random.default_rng(101)
    for _ in range(10):
        transfer, xmix, nmix = random_instance(rng, mean_scale=1.0)
        x, _ = xmix.sample(rng)
        n, _ = nmix.sample(rng)
        model = build_model(transfer, xmix, nmix)
        closed = stochastic_gradient(model, x, n)
        literal = literal_gradient(transfer, xmix, nmix, x, n)
        assert rel_error(closed, literal) < 1e-12


def test_pair_swap_symmetry():
    # the pairwise tables are symmetric in the sense the combined gradient
    # relies on: z is symmetric and transposing both pair axes of the cross
    # tensor (which swaps D_ij with D_ji) leaves the contraction unchanged
    rng = np.random.default_rng(102)
    transfer, xmix, nmix = random_instance(rng, max_comp=2)
    x, _ = xmix.sample(rng)
    n, _ = nmix.sample(rng)
    model = build_model(transfer, xmix, nmix)
    ws = gradient_workspace(model, x, n)
    assert_allclose(ws.pair_norms, ws.pair_norms.T, rtol=1e-12)
    rho = ws.responsibilities
    direct = np.einsum("i,j,ijmd->md", rho, rho, ws.cross_terms)
    swapped = np.einsum("i,j,jimd->md", rho, rho, ws.cross_terms)
    scale = max(np.abs(direct).max(), 1e-300)
    assert np.abs(direct - swapped).max() < 1e-10 * scale


def test_workspace_invariants():
    rng = np.random.default_rng(103)
    transfer, xmix, nmix = random_instance(rng, max_comp=2)
    x, _ = xmix.sample(rng)
    n, _ = nmix.sample(rng)
    model = build_model(transfer, xmix, nmix)
    ws = gradient_workspace(model, x, n)
    y = transfer @ x + n
    est = mmse_estimate(model, y)
    quad = ws.responsibilities @ ws.pair_norms @ ws.responsibilities
    assert abs(quad - est @ est) < 1e-10 * max(est @ est, 1e-300)
    assert np.abs(ws.innovations - (y[None, :] - model.out_means)).max() < 1e-12
    assert_allclose(ws.gradient, stochastic_gradient(model, x, n), rtol=1e-12)


class TestComponentPosteriorNorms:
    def test_single_pair(self):
        mix = GaussianMixture([GaussianComponent(1.0, np.zeros(2), np.eye(2))])
        model = build_model(np.eye(2), mix, mix)
        y = np.array([2.0, -1.0])
        z, rho = component_posterior_norms(model, y)
        est = mmse_estimate(model, y)
        assert z.shape == (1, 1)
        assert_allclose(z[0, 0], est @ est, rtol=1e-12)
        assert_allclose(rho, [1.0])

    def test_equal_posterior_means_degenerate(self):
        # all signal components identical makes every pair posterior equal
        comp = GaussianComponent(0.5, np.zeros(2), np.eye(2))
        xmix = GaussianMixture([comp, GaussianComponent(0.5, np.zeros(2), np.eye(2))])
        nmix = GaussianMixture([GaussianComponent(1.0, np.zeros(2), 0.5 * np.eye(2))])
        model = build_model(np.eye(2), xmix, nmix)
        y = np.array([1.0, 1.0])
        z, rho = component_posterior_norms(model, y)
        assert_allclose(z, z[0, 0], rtol=1e-12)
        assert_allclose(rho @ z @ rho, z[0, 0], rtol=1e-12)

    def test_quadratic_form_equals_estimate_norm(self):
        rng = np.random.default_rng(104)
        transfer, xmix, nmix = random_instance(rng, max_comp=2)
        model = build_model(transfer, xmix, nmix)
        y, _ = model.noise.sample(rng)
        z, rho = component_posterior_norms(model, y)
        est = mmse_estimate(model, y)
        assert abs(rho @ z @ rho - est @ est) < 1e-10 * max(est @ est, 1e-300)
        assert np.all(np.diag(z) >= 0)


class TestBatchGradient:
    def test_single_sample_reduces_to_stochastic(self):
        rng = np.random.default_rng(105)
        transfer, xmix, nmix = random_instance(rng)
        x, _ = xmix.sample(rng)
        n, _ = nmix.sample(rng)
        model = build_model(transfer, xmix, nmix)
        assert_allclose(
            batch_gradient(model, [(x, n)]), stochastic_gradient(model, x, n), rtol=1e-12
        )

    def test_duplicated_sample_equals_single(self):
        rng = np.random.default_rng(106)
        transfer, xmix, nmix = random_instance(rng)
        x, _ = xmix.sample(rng)
        n, _ = nmix.sample(rng)
        model = build_model(transfer, xmix, nmix)
        assert_allclose(
            batch_gradient(model, [(x, n), (x, n)]),
            stochastic_gradient(model, x, n),
            rtol=1e-12,
        )

    def test_empty_batch_rejected(self):
        model = cluster_model(1.0)
        with pytest.raises(ValueError, match="at least one"):
            batch_gradient(model, [])

    def test_variance_scales_inversely_with_batch_size(self):
        # the well-separated regime keeps gradient tails light enough for a
        # finite-repetition variance estimate to resolve the 1/N law
        model = cluster_model(1.0)
        gen = RandomStream(200).generator()
        reps = 2000
        variances = {}
        for size in (1, 4, 16):
            means = np.empty((reps, 2, 2))
            for r in range(reps):
                x, _ = model.signal.sample(gen, size)
                n, _ = model.noise.sample(gen, size)
                means[r] = sample_gradients(model, x, n).mean(axis=0)
            variances[size] = means.var(axis=0).sum()
        for size in (4, 16):
            ratio = variances[size] * size / variances[1]
            assert 0.8 < ratio < 1.2


class TestFiniteDifferenceOracle:
    def test_two_step_sizes_agree_on_smooth_gaussian(self):
        rng = np.random.default_rng(107)
        xmix = GaussianMixture([GaussianComponent(1.0, [0.3, -0.4], np.eye(2))])
        nmix = GaussianMixture([GaussianComponent(1.0, [0.0, 0.0], np.eye(2))])
        transfer = rng.standard_normal((2, 2))
        x, _ = xmix.sample(rng)
        n, _ = nmix.sample(rng)
        build = lambda p: build_model(p, xmix, nmix)
        g5 = finite_difference_gradient(build, transfer, x, n, step=1e-5)
        g6 = finite_difference_gradient(build, transfer, x, n, step=1e-6)
        assert rel_error(g5, g6) < 1e-4

    def test_zero_at_trivial_instance(self):
        mix = GaussianMixture([GaussianComponent(1.0, np.zeros(2), np.eye(2))])
        build = lambda p: build_model(p, mix, mix)
        fd = finite_difference_gradient(build, np.zeros((2, 2)), np.zeros(2), np.zeros(2))
        assert_allclose(fd, np.zeros((2, 2)), atol=1e-9)


def test_objective_value_is_squared_estimate_norm():
    rng = np.random.default_rng(108)
    transfer, xmix, nmix = random_instance(rng)
    model = build_model(transfer, xmix, nmix)
    x, _ = xmix.sample(rng)
    n, _ = nmix.sample(rng)
    est = mmse_estimate(model, transfer @ x + n)
    assert_allclose(objective_value(model, x, n), est @ est, rtol=1e-12)


def test_sample_gradients_chunking_matches_loop():
    model = cluster_model(1.5)
    gen = RandomStream(201).generator()
    x, _ = model.signal.sample(gen, 33)
    n, _ = model.noise.sample(gen, 33)
    stacked = sample_gradients(model, x, n)
    for i in (0, 16, 32):
        assert_allclose(stacked[i], stochastic_gradient(model, x[i], n[i]), rtol=1e-11)
