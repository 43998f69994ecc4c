"""The anchored reverse loop: surgery contracts, determinism, tracing."""

import json

import numpy as np
import pytest

from spectralpurify import datasets, diffusion, purifier, spectra
from spectralpurify.purifier import PurifyConfig, _derive_seed, purify, purify_batch


@pytest.fixture(scope="module")
def setup():
    task = datasets.default_task()
    schedule = diffusion.default_schedule(50)
    denoiser = datasets.make_denoiser(task)
    data = datasets.gen_data(task, 6, seed=42)
    return task, schedule, denoiser, data


class TestConfig:
    def test_defaults_match_tuned_hyperparameters(self):
        cfg = PurifyConfig(t_star=10)
        assert cfg.d_a == 3.0
        assert cfg.d_p == 2.0
        assert cfg.delta == 0.2
        assert cfg.init_mode == "diffuse-adv"

    def test_validation(self):
        sch = diffusion.default_schedule(50)
        with pytest.raises(ValueError):
            PurifyConfig(t_star=0).validate(sch)
        with pytest.raises(ValueError):
            PurifyConfig(t_star=51).validate(sch)
        with pytest.raises(ValueError):
            PurifyConfig(t_star=10, d_a=-1).validate(sch)
        with pytest.raises(ValueError):
            PurifyConfig(t_star=10, init_mode="bootstrap").validate(sch)


class TestSurgeryContracts:
    def test_per_step_spectrum_contracts(self, setup):
        _, schedule, denoiser, data = setup
        x_adv = data.images[0]
        cfg = PurifyConfig(t_star=6, seed=3)
        trace = purify(x_adv, cfg, denoiser, schedule, record_images=True, record_spectra=True)
        assert len(trace.steps) == cfg.t_star

        h, w = x_adv.shape[0], x_adv.shape[1]
        mask_a = spectra.make_mask(h, w, cfg.d_a)[:, :, None]
        mask_p = spectra.make_mask(h, w, cfg.d_p)[:, :, None]
        ap_adv = spectra.decompose(spectra.dft(diffusion.to_working(x_adv)))

        for rec in trace.steps:
            # masked amplitude bins carry the adversarial amplitude bit-exactly
            on_a = np.broadcast_to(mask_a == 1.0, rec.amp_post.shape)
            assert np.array_equal(rec.amp_post[on_a], ap_adv.amplitude[on_a])
            # masked phase bins sit within delta (wrapped) of the adversarial phase
            on_p = np.broadcast_to(mask_p == 1.0, rec.phase_post.shape)
            d = np.abs(spectra.wrap_phase(rec.phase_post - ap_adv.phase))
            assert np.max(d[on_p]) <= cfg.delta + 1e-12
            # unmasked bins are untouched relative to the pre-surgery estimate
            ap_pre = spectra.decompose(spectra.dft(rec.x0_pre))
            off_a = np.broadcast_to(mask_a == 0.0, rec.amp_post.shape)
            assert np.array_equal(rec.amp_post[off_a], ap_pre.amplitude[off_a])
            off_p = np.broadcast_to(mask_p == 0.0, rec.phase_post.shape)
            assert np.array_equal(rec.phase_post[off_p], ap_pre.phase[off_p])

    def test_disabled_surgery_is_bit_exact_passthrough(self, setup):
        _, schedule, denoiser, data = setup
        cfg = PurifyConfig(t_star=5, enable_ase=False, enable_psp=False, seed=1)
        trace = purify(data.images[1], cfg, denoiser, schedule, record_images=True)
        for rec in trace.steps:
            assert np.array_equal(rec.x0_pre, rec.x0_post)

    def test_full_retention_degenerate_case(self, setup):
        # masks covering every bin with delta = 0 force the estimate's
        # spectrum to equal the adversarial spectrum each step, so the output
        # is the adversarial image itself (up to clamping)
        _, schedule, denoiser, data = setup
        x_adv = data.images[2]
        big = float(np.hypot(16, 16) + 1)
        cfg = PurifyConfig(t_star=5, d_a=big, d_p=big, delta=0.0, seed=2)
        trace = purify(x_adv, cfg, denoiser, schedule)
        assert np.max(np.abs(trace.purified - x_adv)) < 1e-9

    def test_near_identity_short_chain_on_mean_image(self, setup):
        # at full-scale granularity (T=1000) one step injects so little noise
        # that purifying a component mean is nearly the identity
        task, _, denoiser, _ = setup
        fine = diffusion.linear_schedule(1000, 1e-4, 0.02)
        mean_img = task.means[0]
        cfg = PurifyConfig(t_star=1, seed=4)
        trace = purify(mean_img, cfg, denoiser, fine)
        assert np.max(np.abs(trace.purified - mean_img)) <= 0.05

    def test_output_finite_and_in_storage_range(self, setup):
        _, schedule, denoiser, data = setup
        cfg = PurifyConfig(t_star=12, seed=5)
        trace = purify(data.images[3], cfg, denoiser, schedule)
        assert np.all(np.isfinite(trace.purified))
        assert trace.purified.min() >= 0.0 and trace.purified.max() <= 1.0

    def test_clamp_counts_recorded(self, setup):
        _, schedule, denoiser, data = setup
        cfg = PurifyConfig(t_star=6, seed=6)
        trace = purify(data.images[4], cfg, denoiser, schedule)
        assert all(rec.clamp_count >= 0 for rec in trace.steps)
        # with delta = pi nothing can be outside the band
        cfg_wide = PurifyConfig(t_star=6, delta=float(np.pi), seed=6)
        trace_wide = purify(data.images[4], cfg_wide, denoiser, schedule)
        assert all(rec.clamp_count == 0 for rec in trace_wide.steps)


class TestDeterminism:
    def test_identical_runs_bit_identical(self, setup):
        _, schedule, denoiser, data = setup
        cfg = PurifyConfig(t_star=8, seed=7)
        a = purify(data.images[0], cfg, denoiser, schedule)
        b = purify(data.images[0], cfg, denoiser, schedule)
        assert np.array_equal(a.purified, b.purified)
        assert [r.clamp_count for r in a.steps] == [r.clamp_count for r in b.steps]

    def test_pure_noise_init_differs_from_diffuse_adv(self, setup):
        _, schedule, denoiser, data = setup
        a = purify(data.images[0], PurifyConfig(t_star=8, seed=7), denoiser, schedule)
        b = purify(data.images[0], PurifyConfig(t_star=8, seed=7, init_mode="pure-noise"),
                   denoiser, schedule)
        assert not np.array_equal(a.purified, b.purified)


class TestBatch:
    def test_batch_of_one_equals_purify(self, setup):
        _, schedule, denoiser, data = setup
        cfg = PurifyConfig(t_star=6, seed=8)
        batch = purify_batch([data.images[0]], cfg, denoiser, schedule)
        rng = np.random.default_rng(_derive_seed(cfg.seed, data.images[0]))
        single = purify(data.images[0], cfg, denoiser, schedule, rng=rng)
        assert np.array_equal(batch[0].purified, single.purified)

    def test_same_seed_twice_bit_identical(self, setup):
        _, schedule, denoiser, data = setup
        cfg = PurifyConfig(t_star=6, seed=9)
        a = purify_batch(data.images[:3], cfg, denoiser, schedule)
        b = purify_batch(data.images[:3], cfg, denoiser, schedule)
        for ta, tb in zip(a, b):
            assert np.array_equal(ta.purified, tb.purified)

    def test_shuffle_invariance(self, setup):
        # seeds are tied to image content, so batch order cannot matter
        _, schedule, denoiser, data = setup
        cfg = PurifyConfig(t_star=6, seed=10)
        order = [2, 0, 1]
        straight = purify_batch(data.images[:3], cfg, denoiser, schedule)
        shuffled = purify_batch([data.images[i] for i in order], cfg, denoiser, schedule)
        for pos, orig in enumerate(order):
            assert np.array_equal(shuffled[pos].purified, straight[orig].purified)

    def test_failures_collected_not_raised(self, setup):
        _, schedule, denoiser, data = setup
        cfg = PurifyConfig(t_star=6, seed=11)
        bad = np.full_like(data.images[0], np.nan)
        with pytest.warns(RuntimeWarning, match="1 image\\(s\\) failed"):
            results = purify_batch([data.images[0], bad], cfg, denoiser, schedule)
        assert results[0] is not None
        assert results[1] is None


class TestErrors:
    def test_module_errors_propagate_from_purify(self, setup):
        _, schedule, denoiser, _ = setup
        with pytest.raises(ValueError):
            purify(np.full((8, 8, 1), np.nan), PurifyConfig(t_star=5), denoiser, schedule)

    def test_bad_shape_rejected(self, setup):
        _, schedule, denoiser, _ = setup
        with pytest.raises(ValueError, match="image"):
            purify(np.zeros(16), PurifyConfig(t_star=5), denoiser, schedule)


class TestTraceSerialization:
    def test_save_writes_manifest_and_images(self, setup, tmp_path):
        _, schedule, denoiser, data = setup
        cfg = PurifyConfig(t_star=4, seed=12)
        trace = purify(data.images[5], cfg, denoiser, schedule, record_images=True)
        out = tmp_path / "trace"
        trace.save(out)
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["steps"]) == 4
        assert (out / "purified.fpim").exists()
        from spectralpurify import io_formats

        first = manifest["steps"][0]
        assert first["t"] == 4
        pre = io_formats.read_array(out / first["x0_pre"])
        assert pre.shape == data.images[5].shape
        reread = io_formats.read_array(out / "purified.fpim")
        assert np.array_equal(reread, trace.purified)
