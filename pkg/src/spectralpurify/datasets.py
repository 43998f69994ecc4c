"""Seeded toy image datasets: an isotropic Gaussian mixture over images
whose component means look like natural pictures (power-law spectra). Each
class owns a pool of low-frequency "scenes" plus one broadband texture cue.
The texture cue is what a pixel-space classifier latches onto and what cheap
attacks break; the scene identity is what purification can anchor to.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io_formats
from .diffusion import DenoiserSpec, analytic_gmm
from .spectra import radial_distance_grid

__all__ = [
    "MixtureSpec",
    "ToyDataset",
    "gen_data",
    "default_task",
    "two_blob_task",
    "make_denoiser",
    "bayes_accuracy_two_component",
    "save_dataset",
    "load_dataset",
]


@dataclass(frozen=True)
class MixtureSpec:
    """Isotropic image mixture: component means (K, H, W, C), simplex
    weights, shared per-pixel noise stddev, and the class id each component
    belongs to.
    """

    means: np.ndarray
    weights: np.ndarray
    sigma: float
    class_ids: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if len(w) != self.means.shape[0] or len(w) != len(self.class_ids):
            raise ValueError("means, weights and class_ids must agree on K")

    @property
    def num_classes(self) -> int:
        return int(np.max(self.class_ids)) + 1

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.means.shape[1:])


@dataclass
class ToyDataset:
    images: np.ndarray  # (N, H, W, C) in [0, 1]
    labels: np.ndarray  # (N,) class ids
    mixture: MixtureSpec
    seed: int


def gen_data(mixture: MixtureSpec, n: int, seed: int = 0) -> ToyDataset:
    """Draw n images: component ~ weights, image = mean + sigma * noise,
    clipped into storage range. Byte-identical for identical seeds.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    comp = rng.choice(len(mixture.weights), size=n, p=mixture.weights)
    noise = rng.standard_normal((n,) + mixture.image_shape)
    images = np.clip(mixture.means[comp] + mixture.sigma * noise, 0.0, 1.0)
    labels = np.asarray(mixture.class_ids, dtype=int)[comp]
    return ToyDataset(images=images, labels=labels, mixture=mixture, seed=seed)


def _spectral_field(
    h: int,
    w: int,
    envelope: np.ndarray,
    rms: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Zero-mean random field with a prescribed centered amplitude envelope."""
    env = envelope.copy()
    env[h // 2, w // 2] = 0.0  # no DC; the caller sets the mean level
    phase = rng.uniform(-np.pi, np.pi, (h, w))
    spec = np.fft.ifftshift(env * np.exp(1j * phase))
    field = np.fft.ifft2(spec).real
    field -= field.mean()
    return field * (rms / np.std(field))


def _powerlaw_split_fields(
    h: int,
    w: int,
    alpha: float,
    rms: float,
    head_radius: float,
    n_heads: int,
    contrast: tuple[float, float],
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """One shared power-law tail (radii > head_radius) plus ``n_heads``
    scene-specific low-frequency heads (radii <= head_radius), all cut from
    the same (1 + r)^-alpha envelope so head + tail reads as one natural
    spectrum. Heads get per-scene contrast factors. Returns (tail, heads).
    """
    r = radial_distance_grid(h, w)
    env = (1.0 + r) ** (-alpha)
    env[h // 2, w // 2] = 0.0
    head_env = np.where(r <= head_radius, env, 0.0)
    tail_env = np.where(r > head_radius, env, 0.0)

    env_power = np.sum(env**2)

    def piece(envelope: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        phase = gen.uniform(-np.pi, np.pi, (h, w))
        spec = np.fft.ifftshift(envelope * np.exp(1j * phase))
        field = np.fft.ifft2(spec).real
        field -= field.mean()
        piece_std = np.std(field)
        if piece_std == 0.0:
            return field
        # Each piece carries its energy share of the full envelope, so head
        # and tail compose into one continuous power-law spectrum of the
        # requested overall rms.
        share = np.sqrt(np.sum(envelope**2) / env_power)
        return field * (rms * share / piece_std)

    tail = piece(tail_env, rng)
    lo, hi = contrast
    heads = np.stack([piece(head_env, rng) * rng.uniform(lo, hi) for _ in range(n_heads)])
    return tail, heads


def _bandpass_texture(h: int, w: int, band: tuple[float, float], rms: float, rng: np.random.Generator) -> np.ndarray:
    """Broadband texture confined to a radial frequency band."""
    r = radial_distance_grid(h, w)
    env = ((r >= band[0]) & (r <= band[1])).astype(np.float64)
    return _spectral_field(h, w, env, rms, rng)


def default_task(
    height: int = 32,
    width: int = 32,
    sigma: float = 0.05,
    background_rms: float = 0.18,
    background_alpha: float = 1.3,
    background_contrast: tuple[float, float] = (0.55, 1.45),
    scene_radius: float = 3.0,
    n_backgrounds: int = 8,
    texture_rms: float = 0.013,
    texture_band: tuple[float, float] = (4.0, 23.0),
    seed: int = 7,
) -> MixtureSpec:
    """The default 2-class task on 32x32 grayscale images.

    Every mean shares one power-law mid/high-frequency field; what varies is
    a low-frequency "scene" head (radii <= scene_radius) drawn per component
    from a class-specific pool, plus one broadband band-pass texture cue per
    class. K = 2 * n_backgrounds components. Class identity is carried two
    ways: by *which* scene an image shows (a component-identity feature
    linear classifiers cannot express, living exactly where the purifier
    anchors) and by the texture cue (which trained classifiers latch onto).
    Gradient attacks follow the classifier into the texture band and leave
    the scene head almost untouched.
    """
    rng = np.random.default_rng(seed)
    q0 = _bandpass_texture(height, width, texture_band, texture_rms, rng)
    q1 = _bandpass_texture(height, width, texture_band, texture_rms, rng)

    tail, heads = _powerlaw_split_fields(
        height, width, background_alpha, background_rms, scene_radius,
        2 * n_backgrounds, background_contrast, rng,
    )
    # Center each class's scene pool so the pools share an identical mean:
    # scene identity then carries zero *linear* class signal and the texture
    # cue is the only feature a linear model can train on.
    pool0 = heads[:n_backgrounds] - heads[:n_backgrounds].mean(axis=0)
    pool1 = heads[n_backgrounds:] - heads[n_backgrounds:].mean(axis=0)
    means = []
    for j in range(n_backgrounds):
        means.append(0.5 + tail + pool0[j] + q0)
        means.append(0.5 + tail + pool1[j] + q1)
    means = np.stack(means)[:, :, :, None]
    k = 2 * n_backgrounds
    return MixtureSpec(
        means=means,
        weights=np.full(k, 1.0 / k),
        sigma=sigma,
        class_ids=np.tile([0, 1], n_backgrounds),
    )


def two_blob_task(
    height: int = 8,
    width: int = 8,
    sigma: float = 0.1,
    separation_sigmas: float = 5.0,
    seed: int = 0,
) -> MixtureSpec:
    """Minimal 2-class mixture with a prescribed mean separation in units of
    sigma (||m1 - m0||_2 = separation_sigmas * sigma); handy for exercising
    the Bayes-rate bookkeeping.
    """
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal((height, width, 1))
    direction /= np.linalg.norm(direction)
    offset = 0.5 * separation_sigmas * sigma * direction
    means = np.stack([0.5 - offset, 0.5 + offset])
    return MixtureSpec(
        means=means,
        weights=np.array([0.5, 0.5]),
        sigma=sigma,
        class_ids=np.array([0, 1]),
    )


def make_denoiser(mixture: MixtureSpec) -> DenoiserSpec:
    """Working-range analytic denoiser for a mixture: x -> 2x - 1 doubles
    both the component means' offsets and the noise scale.
    """
    return analytic_gmm(
        means=2.0 * mixture.means - 1.0,
        weights=mixture.weights,
        sigma=2.0 * mixture.sigma,
    )


def bayes_accuracy_two_component(mixture: MixtureSpec) -> float:
    """Exact Bayes accuracy for an equal-weight two-component mixture:
    Phi(||m1 - m0|| / (2 sigma)).
    """
    if len(mixture.weights) != 2 or abs(mixture.weights[0] - 0.5) > 1e-12:
        raise ValueError("closed form requires two equal-weight components")
    dist = float(np.linalg.norm(mixture.means[1] - mixture.means[0]))
    z = dist / (2.0 * mixture.sigma)
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def save_dataset(dataset: ToyDataset, out_dir, png_previews: int = 8) -> None:
    """Directory layout: clean.fpim (N,H,W,C stack), labels.csv, meta.json,
    and a few PNG previews for eyeballing.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io_formats.write_array(out / "clean.fpim", dataset.images)
    io_formats.write_csv(out / "labels.csv", ["index", "label"],
                         [[i, int(l)] for i, l in enumerate(dataset.labels)])
    io_formats.write_array(out / "means.fpim", dataset.mixture.means)
    meta = {
        "n": int(len(dataset.labels)),
        "sigma": dataset.mixture.sigma,
        "weights": [float(w) for w in dataset.mixture.weights],
        "class_ids": [int(c) for c in dataset.mixture.class_ids],
        "seed": dataset.seed,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2))
    previews = out / "previews"
    previews.mkdir(exist_ok=True)
    for i in range(min(png_previews, len(dataset.labels))):
        io_formats.write_png(previews / f"clean_{i:03d}_label{dataset.labels[i]}.png",
                             dataset.images[i])


def load_dataset(in_dir) -> ToyDataset:
    src = Path(in_dir)
    images = io_formats.read_array(src / "clean.fpim")
    means = io_formats.read_array(src / "means.fpim")
    meta = json.loads((src / "meta.json").read_text())
    _, rows = io_formats.read_csv(src / "labels.csv")
    labels = np.array([int(r[1]) for r in rows])
    mixture = MixtureSpec(
        means=means,
        weights=np.array(meta["weights"]),
        sigma=float(meta["sigma"]),
        class_ids=np.array(meta["class_ids"], dtype=int),
    )
    return ToyDataset(images=images, labels=labels, mixture=mixture, seed=int(meta["seed"]))
