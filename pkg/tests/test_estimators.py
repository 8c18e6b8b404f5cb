"""Estimator correctness and Monte Carlo evaluation tests."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gmdesign import (
    GaussianComponent,
    GaussianMixture,
    RandomStream,
    analytic_gaussian_mmse,
    build_model,
    evaluate_designs,
    evaluate_nmse,
    evaluate_paired,
    genie_estimate,
    lmmse_estimate,
    mmse_estimate,
    prior_mean_estimate,
)
from helpers import cluster_model, random_instance, random_mixture


def gaussian_pair(dim=2):
    mix = GaussianMixture([GaussianComponent(1.0, np.zeros(dim), np.eye(dim))])
    return mix, mix


class TestMMSEEstimate:
    def test_gaussian_posterior_mean(self):
        xmix, nmix = gaussian_pair()
        model = build_model(np.eye(2), xmix, nmix)
        assert_allclose(mmse_estimate(model, np.array([2.0, 2.0])), [1.0, 1.0], rtol=1e-14)

    def test_zero_transfer_returns_prior_mean(self):
        rng = np.random.default_rng(0)
        xmix = random_mixture(rng, 2, 3)
        nmix = random_mixture(rng, 2, 2)
        model = build_model(np.zeros((2, 2)), xmix, nmix)
        prior = xmix.moments()[0]
        for y in rng.standard_normal((8, 2)):
            assert_allclose(mmse_estimate(model, y), prior, rtol=1e-10)

    def test_scalar_bimodal_matches_grid_quadrature(self):
        # independent oracle: grid quadrature of the posterior-mean integral
        xmix = GaussianMixture(
            [
                GaussianComponent(0.5, [-1.0], [[0.1]]),
                GaussianComponent(0.5, [1.0], [[0.1]]),
            ]
        )
        nmix = GaussianMixture([GaussianComponent(1.0, [0.0], [[1.0]])])
        model = build_model(np.eye(1), xmix, nmix)
        y = 0.7
        grid = np.linspace(-8.0, 8.0, 100_001)
        prior = 0.5 * (
            np.exp(-0.5 * (grid + 1.0) ** 2 / 0.1) + np.exp(-0.5 * (grid - 1.0) ** 2 / 0.1)
        ) / np.sqrt(2 * np.pi * 0.1)
        lik = np.exp(-0.5 * (y - grid) ** 2) / np.sqrt(2 * np.pi)
        post = prior * lik
        expected = np.trapezoid(grid * post, grid) / np.trapezoid(post, grid)
        assert_allclose(mmse_estimate(model, np.array([y]))[0], expected, atol=1e-6)

    def test_translation_equivariance_with_noise_means(self):
        rng = np.random.default_rng(1)
        transfer, xmix, nmix = random_instance(rng)
        shift = rng.standard_normal(nmix.dim)
        shifted_noise = GaussianMixture.from_parameters(
            [c.weight for c in nmix.components],
            [c.mean + shift for c in nmix.components],
            [c.covariance for c in nmix.components],
        )
        model = build_model(transfer, xmix, nmix)
        model2 = build_model(transfer, xmix, shifted_noise)
        y = rng.standard_normal(nmix.dim)
        assert_allclose(
            mmse_estimate(model, y), mmse_estimate(model2, y + shift), atol=1e-12
        )


class TestLMMSEEstimate:
    def test_coincides_with_mmse_for_gaussian(self):
        rng = np.random.default_rng(2)
        xmix = GaussianMixture([GaussianComponent(1.0, [0.4, -0.2], np.diag([2.0, 0.5]))])
        nmix = GaussianMixture([GaussianComponent(1.0, [0.1, 0.3], np.eye(2))])
        transfer = rng.standard_normal((2, 2))
        model = build_model(transfer, xmix, nmix)
        for y in rng.standard_normal((20, 2)):
            assert_allclose(lmmse_estimate(model, y), mmse_estimate(model, y), atol=1e-10)

    def test_zero_transfer_returns_prior_mean(self):
        rng = np.random.default_rng(3)
        xmix = random_mixture(rng, 2, 2)
        nmix = random_mixture(rng, 2, 2)
        model = build_model(np.zeros((2, 2)), xmix, nmix)
        assert_allclose(
            lmmse_estimate(model, rng.standard_normal(2)), xmix.moments()[0], atol=1e-12
        )

    def test_never_beats_mmse_on_cluster_model(self):
        model = cluster_model(10 ** 0.5)
        reports = evaluate_paired(model, ["mmse", "lmmse"], 100_000, RandomStream(4))
        assert reports["lmmse"].mmse >= reports["mmse"].mmse


class TestGenieEstimate:
    def test_single_noise_component_equals_mmse(self):
        rng = np.random.default_rng(5)
        xmix = random_mixture(rng, 2, 2)
        nmix = random_mixture(rng, 2, 1)
        model = build_model(rng.standard_normal((2, 2)), xmix, nmix)
        for y in rng.standard_normal((8, 2)):
            assert_allclose(genie_estimate(model, y, 0), mmse_estimate(model, y), rtol=1e-12)

    def test_gaussian_signal_reduction_closed_form(self):
        a = 1.8
        model = cluster_model(a)
        gain = a / (a * a + 0.5)
        rng = np.random.default_rng(6)
        for l, sign in ((0, 1.0), (1, -1.0)):
            y = rng.standard_normal(2) + sign * 5.0
            expected = gain * (y - sign * 5.0 * np.ones(2))
            assert_allclose(genie_estimate(model, y, l), expected, rtol=1e-12)

    def test_bounds_mmse_on_gain_grid(self):
        for gain_db in (1.0, 3.45, 5.0, 7.6, 12.0):
            model = cluster_model(10 ** (gain_db / 10))
            reports = evaluate_paired(model, ["mmse", "genie"], 100_000, RandomStream(7))
            comb = np.hypot(reports["mmse"].stderr, reports["genie"].stderr)
            assert reports["genie"].mmse <= reports["mmse"].mmse + 3 * comb

    def test_index_out_of_range(self):
        model = cluster_model(1.0)
        with pytest.raises(IndexError):
            genie_estimate(model, np.zeros(2), 2)


class TestAnalyticGaussianMMSE:
    def test_identity_case(self):
        xmix, nmix = gaussian_pair()
        assert_allclose(
            analytic_gaussian_mmse(np.eye(2), xmix.components[0], nmix.components[0]), 1.0
        )

    def test_zero_transfer(self):
        xmix, nmix = gaussian_pair()
        assert_allclose(
            analytic_gaussian_mmse(np.zeros((2, 2)), xmix.components[0], nmix.components[0]),
            2.0,
        )

    def test_matches_monte_carlo_random_instance(self):
        rng = np.random.default_rng(8)
        from helpers import random_spd

        xc = GaussianComponent(1.0, rng.standard_normal(3), random_spd(rng, 3))
        nc = GaussianComponent(1.0, rng.standard_normal(3), random_spd(rng, 3))
        transfer = rng.standard_normal((3, 3))
        model = build_model(
            transfer, GaussianMixture([xc]), GaussianMixture([nc])
        )
        report = evaluate_nmse(model, "mmse", 400_000, RandomStream(9))
        expected = analytic_gaussian_mmse(transfer, xc, nc)
        assert abs(report.mmse - expected) < 3 * report.stderr


class TestEvaluation:
    def test_gaussian_closed_form_identity(self):
        xmix, nmix = gaussian_pair()
        model = build_model(np.eye(2), xmix, nmix)
        report = evaluate_nmse(model, "mmse", 1_000_000, RandomStream(10))
        assert abs(report.mmse - 1.0) < 3 * report.stderr
        assert abs(report.identity_mmse - 1.0) < 3 * report.identity_stderr

    def test_zero_transfer_prior_nmse_is_one(self):
        rng = np.random.default_rng(11)
        xmix = random_mixture(rng, 2, 2, mean_scale=0.0)
        nmix = random_mixture(rng, 2, 2)
        model = build_model(np.zeros((2, 2)), xmix, nmix)
        report = evaluate_nmse(model, "mmse", 200_000, RandomStream(12))
        e_xx = xmix.mean_square_norm()
        assert abs(report.nmse - 1.0) < 3 * report.stderr / e_xx

    def test_gain_ordering_on_cluster_model(self):
        lo = cluster_model(10 ** 0.345)
        hi = cluster_model(10 ** 0.76)
        rep_lo = evaluate_nmse(lo, "mmse", 200_000, RandomStream(13))
        rep_hi = evaluate_nmse(hi, "mmse", 200_000, RandomStream(13))
        e_xx = 2.0
        comb = np.hypot(rep_lo.stderr, rep_hi.stderr) / e_xx
        assert rep_hi.nmse - rep_lo.nmse > 5 * comb

    def test_direct_and_identity_forms_agree(self):
        rng = np.random.default_rng(14)
        transfer, xmix, nmix = random_instance(rng)
        model = build_model(transfer, xmix, nmix)
        report = evaluate_nmse(model, "mmse", 200_000, RandomStream(15))
        comb = np.hypot(report.stderr, report.identity_stderr)
        assert abs(report.mmse - report.identity_mmse) < 4 * comb

    def test_estimator_ordering_chain(self):
        model = cluster_model(10 ** 0.345)
        reports = evaluate_paired(
            model, ["genie", "mmse", "lmmse", "prior"], 200_000, RandomStream(16)
        )
        order = ["genie", "mmse", "lmmse", "prior"]
        for a, b in zip(order, order[1:]):
            comb = np.hypot(reports[a].stderr, reports[b].stderr)
            assert reports[a].mmse <= reports[b].mmse + 3 * comb

    def test_worker_count_does_not_change_results(self):
        model = cluster_model(2.0)
        kinds = ["mmse", "lmmse", "genie", "prior"]
        r1 = evaluate_paired(model, kinds, 50_000, RandomStream(17), workers=1)
        r4 = evaluate_paired(model, kinds, 50_000, RandomStream(17), workers=4)
        for kind in kinds:
            assert r1[kind] == r4[kind]

    def test_seed_reproducibility(self):
        model = cluster_model(2.0)
        a = evaluate_nmse(model, "mmse", 10_000, RandomStream(18))
        b = evaluate_nmse(model, "mmse", 10_000, RandomStream(18))
        assert a == b

    def test_mixed_design_entries_share_draws(self):
        # two entries with the same model and kind must produce equal sums
        model = cluster_model(2.0)
        out = evaluate_designs(
            [("a", model, "mmse"), ("b", model, "mmse")], 20_000, RandomStream(19)
        )
        assert out["a"].mmse == out["b"].mmse

    def test_rejects_unknown_kind_and_empty(self):
        model = cluster_model(1.0)
        with pytest.raises(ValueError, match="unknown estimator kind"):
            evaluate_nmse(model, "map", 10, RandomStream(0))
        with pytest.raises(ValueError, match="n_samples"):
            evaluate_nmse(model, "mmse", 0, RandomStream(0))

    def test_prior_mean_estimate_shapes(self):
        model = cluster_model(1.0)
        single = prior_mean_estimate(model, np.zeros(2))
        batch = prior_mean_estimate(model, np.zeros((5, 2)))
        assert single.shape == (2,) and batch.shape == (5, 2)
        assert_allclose(batch, 0.0, atol=1e-15)

    def test_csv_row_format(self):
        model = cluster_model(1.0)
        report = evaluate_nmse(model, "mmse", 1000, RandomStream(20))
        row = report.csv_row("fig6", 0.0)
        assert row[0] == "fig6" and row[1] == "mmse"
        assert row[6] == "1000" and row[7] == "20"
        float(row[3]), float(row[4]), float(row[5])
