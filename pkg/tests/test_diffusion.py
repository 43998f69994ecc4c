"""Noise schedule, forward/reverse steps, and the analytic mixture denoiser."""

import numpy as np
import pytest

from spectralpurify import diffusion
from spectralpurify.diffusion import (
    DenoiserSpec,
    analytic_gmm,
    default_schedule,
    estimate_x0,
    forward_sample,
    gmm_posterior_mean,
    linear_schedule,
    load_file_denoiser,
    posterior_step,
    predict_noise,
    save_file_denoiser,
    to_storage,
    to_working,
    zero_denoiser,
)


class TestSchedule:
    def test_single_step(self):
        sch = linear_schedule(1, 0.5, 0.5)
        assert sch.abar(1) == pytest.approx(0.5)
        assert sch.abar(0) == 1.0

    def test_classic_t1000_first_step(self):
        sch = linear_schedule(1000, 1e-4, 0.02)
        assert sch.abar(1) == pytest.approx(0.9999)

    def test_alpha_bar_strictly_decreasing(self):
        sch = default_schedule(100)
        assert np.all(np.diff(sch.alpha_bar) < 0)
        assert sch.abar(1) < sch.abar(0)

    def test_default_rescaling(self):
        # T=100 scales the classic range by 10 so total noise is comparable
        sch = default_schedule(100)
        assert sch.beta[0] == pytest.approx(1e-3)
        assert sch.beta[-1] == pytest.approx(0.2)

    def test_invalid_ranges(self):
        with pytest.raises(ValueError):
            linear_schedule(10, 0.0, 0.02)
        with pytest.raises(ValueError):
            linear_schedule(10, 0.5, 0.1)
        with pytest.raises(ValueError):
            linear_schedule(10, 0.1, 1.0)
        with pytest.raises(ValueError):
            linear_schedule(0, 0.1, 0.2)


class TestForwardSample:
    def test_t0_boundary_returns_x0(self):
        rng = np.random.default_rng(0)
        sch = default_schedule(50)
        x0 = rng.random((8, 8, 1))
        out = forward_sample(x0, 0, sch, rng.standard_normal(x0.shape))
        assert np.array_equal(out, x0)

    def test_zero_noise_scales_by_sqrt_abar(self):
        sch = default_schedule(50)
        x0 = np.ones((4, 4, 1))
        out = forward_sample(x0, 20, sch, np.zeros_like(x0))
        assert np.allclose(out, np.sqrt(sch.abar(20)))

    def test_monte_carlo_variance(self):
        sch = default_schedule(50)
        t = 25
        rng = np.random.default_rng(1)
        x0 = np.zeros(10**5)
        noise = rng.standard_normal(10**5)
        xt = np.sqrt(sch.abar(t)) * x0 + np.sqrt(1 - sch.abar(t)) * noise
        # same draw routed through forward_sample
        xt2 = forward_sample(x0.reshape(-1, 1, 1), t, sch, noise.reshape(-1, 1, 1))
        assert np.allclose(xt, xt2.ravel())
        assert np.var(xt) == pytest.approx(1 - sch.abar(t), rel=0.02)

    def test_out_of_range_t(self):
        sch = default_schedule(50)
        x0 = np.zeros((2, 2, 1))
        with pytest.raises(ValueError):
            forward_sample(x0, 51, sch, np.zeros_like(x0))
        with pytest.raises(ValueError):
            forward_sample(x0, -1, sch, np.zeros_like(x0))


class TestEstimateX0:
    def test_inversion_identity_all_t(self):
        rng = np.random.default_rng(2)
        sch = default_schedule(50)
        x0 = rng.random((8, 8, 1))
        eps = rng.standard_normal(x0.shape)
        for t in (1, 10, 25, 50):
            xt = forward_sample(x0, t, sch, eps)
            rec = estimate_x0(xt, t, eps, sch)
            assert np.max(np.abs(rec - x0)) < 1e-10

    def test_zero_eps_hat(self):
        sch = default_schedule(50)
        xt = np.full((2, 2, 1), 0.4)
        out = estimate_x0(xt, 30, np.zeros_like(xt), sch)
        assert np.allclose(out, 0.4 / np.sqrt(sch.abar(30)))

    def test_tiny_abar_rejected(self):
        sch = linear_schedule(200, 0.3, 0.5)  # abar underflows fast
        assert sch.abar(200) < 1e-12
        xt = np.zeros((2, 2, 1))
        with pytest.raises(ValueError, match="too small"):
            estimate_x0(xt, 200, np.zeros_like(xt), sch)

    def test_single_component_posterior_is_conditional_gaussian(self):
        rng = np.random.default_rng(3)
        sch = default_schedule(100)
        mu = rng.normal(0, 0.5, (4, 4, 1))
        sigma = 0.3
        den = analytic_gmm(mu[None], np.array([1.0]), sigma)
        t = 40
        xt = rng.standard_normal((4, 4, 1))
        x0_hat = estimate_x0(xt, t, predict_noise(den, xt, t, sch), sch)
        abar = sch.abar(t)
        v = abar * sigma**2 + 1 - abar
        closed = mu + (np.sqrt(abar) * sigma**2 / v) * (xt - np.sqrt(abar) * mu)
        assert np.max(np.abs(x0_hat - closed)) < 1e-8


class TestPredictNoise:
    def test_zero_denoiser(self):
        sch = default_schedule(50)
        xt = np.ones((3, 3, 1))
        assert np.array_equal(predict_noise(zero_denoiser(), xt, 10, sch), np.zeros_like(xt))

    def test_point_mass_limit_snaps_to_mean(self):
        rng = np.random.default_rng(4)
        sch = default_schedule(50)
        mu = rng.normal(0, 0.5, (4, 4, 1))
        den = analytic_gmm(mu[None], np.array([1.0]), sigma=1e-9)
        xt = rng.standard_normal((4, 4, 1))
        x0_hat = estimate_x0(xt, 20, predict_noise(den, xt, 20, sch), sch)
        assert np.max(np.abs(x0_hat - mu)) < 1e-6

    def test_responsibility_concentrates_on_matching_component(self):
        sch = default_schedule(50)
        means = np.stack([np.zeros((4, 4, 1)), np.full((4, 4, 1), 2.0)])
        den = analytic_gmm(means, np.array([0.5, 0.5]), sigma=0.05)
        t = 5
        xt = np.sqrt(sch.abar(t)) * means[1]
        # independent log-density computation of the responsibilities
        abar = sch.abar(t)
        v = abar * 0.05**2 + 1 - abar
        sq = [float(np.sum((xt - np.sqrt(abar) * m) ** 2)) for m in means]
        logw = np.log(0.5) - np.array(sq) / (2 * v)
        w = np.exp(logw - logw.max())
        w /= w.sum()
        assert w[1] > 0.999
        x0_hat = gmm_posterior_mean(den, xt, t, sch)
        assert np.max(np.abs(x0_hat - means[1])) < 2e-3

    def test_monte_carlo_posterior_oracle(self):
        # eps_hat must match the importance-sampled E[eps | x_t] on a 4x4 toy
        rng = np.random.default_rng(5)
        sch = default_schedule(100)
        means = np.stack([rng.normal(0, 0.5, (4, 4, 1)), rng.normal(0, 0.5, (4, 4, 1))])
        sigma = 0.25
        den = analytic_gmm(means, np.array([0.3, 0.7]), sigma)
        t = 40
        abar = sch.abar(t)
        x0 = means[1] + sigma * rng.standard_normal((4, 4, 1))
        xt = forward_sample(x0, t, sch, rng.standard_normal(x0.shape))

        n = 10**6
        comp = rng.choice(2, size=n, p=[0.3, 0.7])
        x0s = means.reshape(2, -1)[comp] + sigma * rng.standard_normal((n, 16))
        resid = xt.reshape(-1)[None, :] - np.sqrt(abar) * x0s
        logw = -np.sum(resid**2, axis=1) / (2 * (1 - abar))
        logw -= logw.max()
        w = np.exp(logw)
        w /= w.sum()
        eps_mc = w @ (resid / np.sqrt(1 - abar))

        eps_hat = predict_noise(den, xt, t, sch).reshape(-1)
        scale = np.max(np.abs(eps_hat))
        assert np.max(np.abs(eps_hat - eps_mc)) / scale < 0.01

    def test_degenerate_responsibilities_raise(self):
        sch = default_schedule(50)
        means = np.zeros((1, 2, 2, 1))
        den = analytic_gmm(means, np.array([1.0]), sigma=0.1)
        huge = np.full((2, 2, 1), 1e300)
        with pytest.raises(FloatingPointError, match="degenerate"):
            predict_noise(den, huge, 10, sch)

    def test_file_weights_reserved(self, tmp_path):
        path = tmp_path / "weights.fpdn"
        save_file_denoiser(path, np.zeros((3, 4)))
        spec = load_file_denoiser(path, expected_shape=(3, 4))
        assert spec.kind == "file-weights"
        with pytest.raises(NotImplementedError):
            predict_noise(spec, np.zeros((2, 2, 1)), 5, default_schedule(50))

    def test_bad_denoiser_specs_rejected(self):
        with pytest.raises(ValueError):
            DenoiserSpec(kind="analytic-gmm")  # missing fields
        with pytest.raises(ValueError):
            analytic_gmm(np.zeros((2, 2, 2, 1)), np.array([0.7, 0.7]), 0.1)
        with pytest.raises(ValueError):
            analytic_gmm(np.zeros((2, 2, 2, 1)), np.array([0.5, 0.5]), -1.0)
        with pytest.raises(ValueError):
            DenoiserSpec(kind="mystery")


class TestPosteriorStep:
    def test_small_beta_near_identity(self):
        sch = linear_schedule(50, 1e-6, 1e-5)
        rng = np.random.default_rng(6)
        xt = rng.standard_normal((4, 4, 1))
        out = posterior_step(xt, xt, 25, sch, np.zeros_like(xt))
        assert np.max(np.abs(out - xt)) < 1e-4

    def test_scalar_substitution_identity(self):
        # constant image c with x_t = sqrt(abar_t) c, x0_hat = c must step to
        # exactly sqrt(abar_{t-1}) c when no noise is added
        sch = default_schedule(50)
        c = 0.8
        for t in (2, 10, 30, 50):
            xt = np.full((3, 3, 1), np.sqrt(sch.abar(t)) * c)
            x0 = np.full((3, 3, 1), c)
            out = posterior_step(xt, x0, t, sch, np.zeros_like(xt))
            assert np.allclose(out, np.sqrt(sch.abar(t - 1)) * c, atol=1e-12)

    def test_final_step_deterministic(self):
        sch = default_schedule(50)
        rng = np.random.default_rng(7)
        xt = rng.standard_normal((4, 4, 1))
        x0 = rng.standard_normal((4, 4, 1))
        a = posterior_step(xt, x0, 1, sch, rng.standard_normal(xt.shape))
        b = posterior_step(xt, x0, 1, sch, rng.standard_normal(xt.shape))
        assert np.array_equal(a, b)

    def test_t_zero_rejected(self):
        sch = default_schedule(50)
        x = np.zeros((2, 2, 1))
        with pytest.raises(ValueError):
            posterior_step(x, x, 0, sch)


class TestRanges:
    def test_round_trip(self):
        rng = np.random.default_rng(8)
        x = rng.random((5, 5, 1))
        assert np.allclose(to_storage(to_working(x)), x)

    def test_storage_clamps(self):
        assert to_storage(np.array([-3.0, 0.0, 3.0])).tolist() == [0.0, 0.5, 1.0]


class TestDenoiserOptimality:
    def test_posterior_mean_beats_perturbed_denoisers(self):
        # the posterior mean minimizes MSE; 20 fixed random perturbations of
        # the noise prediction (scale 0.1) must all do worse over 1000 trials
        rng = np.random.default_rng(9)
        sch = default_schedule(50)
        means = np.stack([rng.normal(0, 0.5, (4, 4, 1)), rng.normal(0, 0.5, (4, 4, 1))])
        sigma = 0.25
        den = analytic_gmm(means, np.array([0.5, 0.5]), sigma)
        t = 20
        perturbations = [0.1 * rng.standard_normal((4, 4, 1)) for _ in range(20)]

        mse_exact = 0.0
        mse_perturbed = np.zeros(20)
        trials = 1000
        for _ in range(trials):
            comp = rng.choice(2)
            x0 = means[comp] + sigma * rng.standard_normal((4, 4, 1))
            xt = forward_sample(x0, t, sch, rng.standard_normal(x0.shape))
            eps_hat = predict_noise(den, xt, t, sch)
            x0_hat = estimate_x0(xt, t, eps_hat, sch)
            mse_exact += float(np.mean((x0_hat - x0) ** 2))
            for k, pert in enumerate(perturbations):
                x0_k = estimate_x0(xt, t, eps_hat + pert, sch)
                mse_perturbed[k] += float(np.mean((x0_k - x0) ** 2))
        mse_exact /= trials
        mse_perturbed /= trials
        assert np.all(mse_exact <= mse_perturbed)


class TestSamplingConsistency:
    def test_component_frequencies_match_weights(self):
        # full reverse chains from pure noise land on components with
        # frequencies matching the mixture weights (within 3 standard errors)
        sch = default_schedule(50)
        rng = np.random.default_rng(10)
        means = np.stack([np.full((4, 4, 1), -0.6), np.full((4, 4, 1), 0.6)])
        pi0 = 0.3
        den = analytic_gmm(means, np.array([pi0, 1 - pi0]), sigma=0.1)
        runs = 1000
        hits = 0
        for _ in range(runs):
            x = rng.standard_normal((4, 4, 1))
            for t in range(sch.T, 0, -1):
                eps = predict_noise(den, x, t, sch)
                x0h = estimate_x0(x, t, eps, sch)
                x = posterior_step(x, x0h, t, sch, rng.standard_normal(x.shape))
            d0 = np.sum((x - means[0]) ** 2)
            d1 = np.sum((x - means[1]) ** 2)
            hits += int(d0 < d1)
        freq = hits / runs
        se = np.sqrt(pi0 * (1 - pi0) / runs)
        assert abs(freq - pi0) <= 3 * se
