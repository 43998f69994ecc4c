"""Toy mixture generation, Bayes bookkeeping, dataset I/O."""

import numpy as np
import pytest

from spectralpurify import datasets
from spectralpurify.datasets import (
    MixtureSpec,
    bayes_accuracy_two_component,
    default_task,
    gen_data,
    load_dataset,
    make_denoiser,
    save_dataset,
    two_blob_task,
)


class TestGenData:
    def test_byte_identical_for_same_seed(self):
        task = two_blob_task()
        a = gen_data(task, 64, seed=5)
        b = gen_data(task, 64, seed=5)
        assert np.array_equal(a.images, b.images)
        assert np.array_equal(a.labels, b.labels)

    def test_single_component_all_labels_zero(self):
        rng = np.random.default_rng(0)
        spec = MixtureSpec(
            means=rng.random((1, 4, 4, 1)),
            weights=np.array([1.0]),
            sigma=0.1,
            class_ids=np.array([0]),
        )
        ds = gen_data(spec, 50, seed=1)
        assert np.all(ds.labels == 0)

    def test_class_frequencies_match_weights(self):
        task = default_task()
        ds = gen_data(task, 10**4, seed=2)
        freq = np.mean(ds.labels == 0)
        se = np.sqrt(0.5 * 0.5 / 10**4)
        assert abs(freq - 0.5) <= 3 * se

    def test_images_in_storage_range(self):
        ds = gen_data(default_task(), 32, seed=3)
        assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            MixtureSpec(means=np.zeros((2, 4, 4, 1)), weights=np.array([0.5, 0.6]),
                        sigma=0.1, class_ids=np.array([0, 1]))
        with pytest.raises(ValueError):
            MixtureSpec(means=np.zeros((2, 4, 4, 1)), weights=np.array([0.5, 0.5]),
                        sigma=0.0, class_ids=np.array([0, 1]))
        with pytest.raises(ValueError):
            gen_data(two_blob_task(), 0)


class TestDefaultTask:
    def test_shape_and_structure(self):
        task = default_task()
        assert task.means.shape == (16, 32, 32, 1)
        assert task.num_classes == 2
        assert np.allclose(task.weights.sum(), 1.0)
        # scene pools centered: the two classes share an identical mean image,
        # except for the texture cues
        m0 = task.means[task.class_ids == 0].mean(axis=0)
        m1 = task.means[task.class_ids == 1].mean(axis=0)
        diff = m0 - m1
        from spectralpurify.spectra import dft, make_mask

        spec = np.abs(dft(diff[:, :, 0]))
        low = make_mask(32, 32, 3.0)
        assert np.max(spec * low) < 1e-9  # no linear class signal at low freq

    def test_scene_heads_are_low_frequency(self):
        task = default_task()
        from spectralpurify.spectra import dft, make_mask

        scene_diff = (task.means[0] - task.means[2])[:, :, 0]  # same class, different scene
        spec = np.abs(dft(scene_diff))
        inside = make_mask(32, 32, 3.0)
        energy_in = np.sum((spec * inside) ** 2)
        assert energy_in / np.sum(spec**2) > 0.999

    def test_deterministic(self):
        a = default_task(seed=7)
        b = default_task(seed=7)
        assert np.array_equal(a.means, b.means)


class TestBayes:
    def test_closed_form_matches_erf_oracle(self):
        import math

        task = two_blob_task(separation_sigmas=4.0)
        d = np.linalg.norm(task.means[1] - task.means[0])
        z = d / (2 * task.sigma)
        oracle = 0.5 * (1 + math.erf(z / math.sqrt(2)))
        assert bayes_accuracy_two_component(task) == pytest.approx(oracle, rel=1e-12)
        assert bayes_accuracy_two_component(task) == pytest.approx(0.9772, abs=1e-3)

    def test_requires_two_equal_components(self):
        rng = np.random.default_rng(1)
        spec = MixtureSpec(means=rng.random((2, 4, 4, 1)), weights=np.array([0.3, 0.7]),
                           sigma=0.1, class_ids=np.array([0, 1]))
        with pytest.raises(ValueError):
            bayes_accuracy_two_component(spec)


class TestDenoiserMapping:
    def test_working_range_scaling(self):
        task = two_blob_task()
        den = make_denoiser(task)
        assert den.kind == "analytic-gmm"
        assert np.allclose(den.means, 2 * task.means - 1)
        assert den.sigma == pytest.approx(2 * task.sigma)
        assert np.array_equal(den.weights, task.weights)


class TestDatasetIO:
    def test_round_trip(self, tmp_path):
        ds = gen_data(default_task(), 8, seed=9)
        save_dataset(ds, tmp_path / "d")
        loaded = load_dataset(tmp_path / "d")
        assert np.array_equal(loaded.images, ds.images)
        assert np.array_equal(loaded.labels, ds.labels)
        assert np.array_equal(loaded.mixture.means, ds.mixture.means)
        assert loaded.mixture.sigma == ds.mixture.sigma
        assert loaded.seed == ds.seed

    def test_previews_written(self, tmp_path):
        ds = gen_data(default_task(), 8, seed=9)
        save_dataset(ds, tmp_path / "d", png_previews=3)
        pngs = sorted((tmp_path / "d" / "previews").glob("*.png"))
        assert len(pngs) == 3
        assert pngs[0].read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
