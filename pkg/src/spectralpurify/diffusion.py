"""DDPM plumbing: noise schedule, forward noising, clean-image estimation,
posterior sampling, and a closed-form Gaussian-mixture denoiser that stands
in for a trained noise-prediction network.

Images enter in storage range [0, 1] and are diffused in working range
[-1, 1] (x -> 2x - 1); :func:`to_storage` maps back with clamping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io_formats

__all__ = [
    "NoiseSchedule",
    "linear_schedule",
    "default_schedule",
    "forward_sample",
    "estimate_x0",
    "DenoiserSpec",
    "analytic_gmm",
    "zero_denoiser",
    "load_file_denoiser",
    "save_file_denoiser",
    "predict_noise",
    "gmm_posterior_mean",
    "posterior_step",
    "to_working",
    "to_storage",
]

ALPHA_BAR_FLOOR = 1e-12


@dataclass(frozen=True)
class NoiseSchedule:
    """Tables of beta_t, alpha_t = 1 - beta_t and the running product
    alpha_bar_t, indexed by time-step t = 1..T; alpha_bar at t = 0 is 1.
    """

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def T(self) -> int:
        return len(self.beta)

    def abar(self, t: int) -> float:
        """alpha_bar at step t, with abar(0) = 1 by definition."""
        if not 0 <= t <= self.T:
            raise ValueError(f"t={t} outside [0, {self.T}]")
        return 1.0 if t == 0 else float(self.alpha_bar[t - 1])

    def beta_at(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise ValueError(f"t={t} outside [1, {self.T}]")
        return float(self.beta[t - 1])

    def alpha_at(self, t: int) -> float:
        if not 1 <= t <= self.T:
            raise ValueError(f"t={t} outside [1, {self.T}]")
        return float(self.alpha[t - 1])


def linear_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linearly interpolated beta table with derived alpha, alpha_bar."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(f"need 0 < beta_start <= beta_end < 1, got [{beta_start}, {beta_end}]")
    beta = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(beta=beta, alpha=alpha, alpha_bar=alpha_bar)


def default_schedule(T: int = 100) -> NoiseSchedule:
    """Desk-scale default: the classic T=1000 linear range [1e-4, 0.02]
    rescaled by 1000/T so total noise injected stays comparable. The rescale
    keeps beta below 1 only for T >= 25; build very short schedules
    explicitly with :func:`linear_schedule`.
    """
    if not 25 <= T <= 1000:
        raise ValueError(f"default_schedule supports 25 <= T <= 1000, got {T}")
    scale = 1000.0 / T
    return linear_schedule(T, 1e-4 * scale, 0.02 * scale)


def forward_sample(x0: np.ndarray, t: int, schedule: NoiseSchedule, noise: np.ndarray) -> np.ndarray:
    """x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise.

    t = 0 is the degenerate boundary (abar = 1, returns x0); t beyond T is an
    error.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if not 0 <= t <= schedule.T:
        raise ValueError(f"t={t} outside [0, {schedule.T}]")
    abar = schedule.abar(t)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != x0.shape:
        raise ValueError(f"noise shape {noise.shape} != image shape {x0.shape}")
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * noise


def estimate_x0(x_t: np.ndarray, t: int, eps_hat: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """Invert the forward process: x0|t = (x_t - sqrt(1-abar_t) * eps_hat) / sqrt(abar_t)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if eps_hat.shape != x_t.shape:
        raise ValueError(f"eps_hat shape {eps_hat.shape} != x_t shape {x_t.shape}")
    abar = schedule.abar(t)
    if abar < ALPHA_BAR_FLOOR:
        raise ValueError(f"abar({t})={abar:.3e} too small; division would blow up")
    return (x_t - np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(abar)


@dataclass(frozen=True)
class DenoiserSpec:
    """Noise predictor contract: (x_t, t) -> estimated noise.

    kind "analytic-gmm" is the closed-form posterior of an isotropic Gaussian
    mixture (means stacked (K, ...image shape), simplex weights, shared
    stddev); "zero" predicts no noise; "file-weights" is a reserved slot for
    learned weights loaded from an FPDN file.
    """

    kind: str
    means: np.ndarray | None = None
    weights: np.ndarray | None = None
    sigma: float | None = None
    payload: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "analytic-gmm":
            if self.means is None or self.weights is None or self.sigma is None:
                raise ValueError("analytic-gmm needs means, weights and sigma")
            w = np.asarray(self.weights, dtype=np.float64)
            if np.any(w < 0) or abs(float(np.sum(w)) - 1.0) > 1e-9:
                raise ValueError("weights must be a simplex (nonnegative, sum 1)")
            if self.sigma <= 0:
                raise ValueError("sigma must be positive")
            if len(w) != np.asarray(self.means).shape[0]:
                raise ValueError("weights length must match number of component means")
        elif self.kind not in ("zero", "file-weights"):
            raise ValueError(f"unknown denoiser kind {self.kind!r}")


def analytic_gmm(means: np.ndarray, weights: np.ndarray, sigma: float) -> DenoiserSpec:
    means = np.asarray(means, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    return DenoiserSpec(kind="analytic-gmm", means=means, weights=weights, sigma=float(sigma))


def zero_denoiser() -> DenoiserSpec:
    return DenoiserSpec(kind="zero")


def save_file_denoiser(path, payload: np.ndarray) -> None:
    io_formats.write_array(path, payload, magic="FPDN")


def load_file_denoiser(path, expected_shape: tuple[int, ...] | None = None) -> DenoiserSpec:
    """Load reserved file-weights; validates magic and (optionally) shape only."""
    payload = io_formats.read_array(path, magic="FPDN")
    if expected_shape is not None and payload.shape != tuple(expected_shape):
        raise io_formats.FormatError(
            f"{path}: payload shape {payload.shape} != expected {tuple(expected_shape)}"
        )
    return DenoiserSpec(kind="file-weights", payload=payload)


def gmm_posterior_mean(spec: DenoiserSpec, x_t: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """E[x0 | x_t] for the analytic mixture.

    With x0 ~ sum_k pi_k N(mu_k, sigma^2 I) and x_t = sqrt(abar) x0 +
    sqrt(1-abar) eps, the marginal of x_t is a mixture with component
    variance v = abar sigma^2 + 1 - abar.  Responsibilities are computed in
    log space (max-subtracted) because densities underflow at pixel-count
    dimension; each component contributes its conditional-Gaussian mean
    mu_k + (sqrt(abar) sigma^2 / v)(x_t - sqrt(abar) mu_k).
    """
    if spec.kind != "analytic-gmm":
        raise ValueError("gmm_posterior_mean requires an analytic-gmm denoiser")
    x_t = np.asarray(x_t, dtype=np.float64)
    means = spec.means.reshape(spec.means.shape[0], -1)
    x = x_t.reshape(-1)
    if x.shape[0] != means.shape[1]:
        raise ValueError(f"x_t size {x.shape[0]} != component size {means.shape[1]}")
    abar = schedule.abar(t)
    v = abar * spec.sigma**2 + (1.0 - abar)
    with np.errstate(over="ignore"):  # inf distances fall through to the check below
        sq = np.sum((x[None, :] - np.sqrt(abar) * means) ** 2, axis=1)
    logw = np.log(spec.weights) - sq / (2.0 * v)
    if not np.any(np.isfinite(logw)):
        raise FloatingPointError(
            f"degenerate responsibilities at t={t}: all log-densities non-finite "
            f"(abar={abar:.3e}, v={v:.3e})"
        )
    logw = logw - np.max(logw)
    w = np.exp(logw)
    w = w / np.sum(w)
    gain = np.sqrt(abar) * spec.sigma**2 / v
    post = means + gain * (x[None, :] - np.sqrt(abar) * means)
    return (w @ post).reshape(x_t.shape)


def predict_noise(spec: DenoiserSpec, x_t: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """Predicted noise eps_hat = (x_t - sqrt(abar) E[x0|x_t]) / sqrt(1-abar)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if spec.kind == "zero":
        return np.zeros_like(x_t)
    if spec.kind == "file-weights":
        raise NotImplementedError("file-weights denoisers are a reserved format, not runnable")
    if not 1 <= t <= schedule.T:
        raise ValueError(f"t={t} outside [1, {schedule.T}]")
    abar = schedule.abar(t)
    x0_hat = gmm_posterior_mean(spec, x_t, t, schedule)
    return (x_t - np.sqrt(abar) * x0_hat) / np.sqrt(1.0 - abar)


def posterior_step(
    x_t: np.ndarray,
    x0_hat: np.ndarray,
    t: int,
    schedule: NoiseSchedule,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """One ancestral step x_{t-1} ~ q(x_{t-1} | x_t, x0_hat).

    mu = (sqrt(abar_{t-1}) beta_t / (1 - abar_t)) x0_hat
       + (sqrt(alpha_t) (1 - abar_{t-1}) / (1 - abar_t)) x_t,
    var = ((1 - abar_{t-1}) / (1 - abar_t)) beta_t.

    The final step t=1 is deterministic (sigma_1 = 0).
    """
    if t < 1:
        raise ValueError("posterior_step needs t >= 1")
    x_t = np.asarray(x_t, dtype=np.float64)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    abar_t = schedule.abar(t)
    abar_prev = schedule.abar(t - 1)
    beta_t = schedule.beta_at(t)
    alpha_t = schedule.alpha_at(t)
    coef_x0 = np.sqrt(abar_prev) * beta_t / (1.0 - abar_t)
    coef_xt = np.sqrt(alpha_t) * (1.0 - abar_prev) / (1.0 - abar_t)
    mean = coef_x0 * x0_hat + coef_xt * x_t
    if t == 1:
        return mean
    sigma = np.sqrt((1.0 - abar_prev) / (1.0 - abar_t) * beta_t)
    if noise is None:
        noise = np.zeros_like(x_t)
    return mean + sigma * np.asarray(noise, dtype=np.float64)


def to_working(x: np.ndarray) -> np.ndarray:
    """Storage [0, 1] -> diffusion working range [-1, 1]."""
    return 2.0 * np.asarray(x, dtype=np.float64) - 1.0


def to_storage(x: np.ndarray) -> np.ndarray:
    """Working range -> storage [0, 1], clamped."""
    return np.clip((np.asarray(x, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)
