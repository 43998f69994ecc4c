"""Frequency-domain machinery: 2-D DFT, amplitude/phase views, radial masks,
low-frequency amplitude exchange and phase projection, Hermitian repair.

Conventions used throughout:

- Images are real float arrays shaped (H, W) or (H, W, C); channels are
  transformed independently.
- Spectra are complex arrays of the same shape in the *centered* convention:
  the zero-frequency bin sits at index (H//2, W//2) (i.e. fftshift applied).
- Phases live in the half-open interval (-pi, pi].
"""

from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np

__all__ = [
    "AmpPhase",
    "dft",
    "idft",
    "imag_residual",
    "decompose",
    "recompose",
    "wrap_phase",
    "radial_distance",
    "radial_distance_grid",
    "make_mask",
    "amplitude_exchange",
    "phase_project",
    "count_phase_clamps",
    "enforce_hermitian",
]


class AmpPhase(NamedTuple):
    """Polar view of a spectrum: nonnegative amplitude and phase in (-pi, pi]."""

    amplitude: np.ndarray
    phase: np.ndarray


def _check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")


def _shifted_axes(a: np.ndarray) -> tuple[int, int]:
    # Transform axes are always the leading two; channels (if any) trail.
    if a.ndim not in (2, 3):
        raise ValueError(f"expected a (H, W) or (H, W, C) array, got shape {a.shape}")
    return (0, 1)


def dft(image: np.ndarray) -> np.ndarray:
    """Unnormalized forward 2-D DFT per channel, returned centered.

    Round-trips through :func:`idft` to ~1e-15 relative accuracy.
    """
    image = np.asarray(image, dtype=np.float64)
    axes = _shifted_axes(image)
    _check_finite(image, "image")
    return np.fft.fftshift(np.fft.fft2(image, axes=axes), axes=axes)


def idft(spectrum: np.ndarray, warn_tol: float = 1e-6) -> np.ndarray:
    """Inverse of :func:`dft`: 1/(H*W)-normalized, real part returned.

    A large imaginary residual means the spectrum lost Hermitian symmetry
    somewhere upstream; that is reported as a RuntimeWarning rather than an
    error because the real part is still the best available reconstruction.
    """
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    axes = _shifted_axes(spectrum)
    _check_finite(spectrum.view(np.float64), "spectrum")
    inv = np.fft.ifft2(np.fft.ifftshift(spectrum, axes=axes), axes=axes)
    residual = float(np.max(np.abs(inv.imag))) if inv.size else 0.0
    if residual > warn_tol:
        warnings.warn(
            f"idft imaginary residual {residual:.3e} exceeds {warn_tol:.1e}; "
            "spectrum is not Hermitian",
            RuntimeWarning,
            stacklevel=2,
        )
    return inv.real


def imag_residual(spectrum: np.ndarray) -> float:
    """Max |imag| of the inverse transform; ~0 for Hermitian spectra."""
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    axes = _shifted_axes(spectrum)
    inv = np.fft.ifft2(np.fft.ifftshift(spectrum, axes=axes), axes=axes)
    return float(np.max(np.abs(inv.imag)))


def wrap_phase(phi: np.ndarray) -> np.ndarray:
    """Wrap angles into (-pi, pi]. Exactly -pi maps to +pi."""
    out = np.mod(np.asarray(phi, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


def decompose(spectrum: np.ndarray) -> AmpPhase:
    """Split a spectrum into amplitude sqrt(R^2+I^2) and phase atan2(I, R).

    Phase at exactly-zero bins is defined as 0 (atan2(0, 0) is otherwise
    indeterminate).
    """
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    amplitude = np.abs(spectrum)
    phase = np.arctan2(spectrum.imag, spectrum.real)
    phase = np.where(amplitude == 0.0, 0.0, phase)
    return AmpPhase(amplitude=amplitude, phase=wrap_phase(phase))


def recompose(amp_phase: AmpPhase) -> np.ndarray:
    """Inverse of :func:`decompose`: amplitude * exp(i * phase)."""
    amp, phase = amp_phase
    return np.asarray(amp, dtype=np.float64) * np.exp(1j * np.asarray(phase, dtype=np.float64))


def radial_distance(u, v, height: int, width: int):
    """Distance from frequency coordinate (u, v) to the center of the
    centered H x W frequency rectangle: [(u - H/2)^2 + (v - W/2)^2]^(1/2).
    """
    du = np.asarray(u, dtype=np.float64) - height / 2.0
    dv = np.asarray(v, dtype=np.float64) - width / 2.0
    return np.sqrt(du * du + dv * dv)


def radial_distance_grid(height: int, width: int) -> np.ndarray:
    """(H, W) grid of radial distances from the centered origin."""
    u = np.arange(height, dtype=np.float64)[:, None]
    v = np.arange(width, dtype=np.float64)[None, :]
    return radial_distance(u, v, height, width)


def make_mask(height: int, width: int, cutoff: float) -> np.ndarray:
    """Binary low-pass mask: 1.0 where radial distance <= cutoff, else 0.0.

    The boundary is inclusive so that cutoff=0 still retains the DC bin.
    """
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    return (radial_distance_grid(height, width) <= cutoff).astype(np.float64)


def _broadcast_mask(mask: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != shape[:2]:
        raise ValueError(f"mask shape {mask.shape} does not match spectrum {shape}")
    if len(shape) == 3:
        return mask[:, :, None]
    return mask


def _check_shapes(est: AmpPhase, adv: AmpPhase) -> None:
    if est.amplitude.shape != adv.amplitude.shape:
        raise ValueError(
            f"shape mismatch: est {est.amplitude.shape} vs adv {adv.amplitude.shape}"
        )


def amplitude_exchange(est: AmpPhase, adv: AmpPhase, mask: np.ndarray) -> AmpPhase:
    """Replace the masked (low-frequency) amplitude of ``est`` with ``adv``'s.

    A_out = A_est * (1 - M) + A_adv * M, applied with the same mask on every
    channel; the phase of ``est`` is untouched. Masked bins copy the adversarial
    amplitude bit-exactly (M is exactly 0/1).
    """
    _check_shapes(est, adv)
    m = _broadcast_mask(mask, est.amplitude.shape)
    amplitude = est.amplitude * (1.0 - m) + adv.amplitude * m
    return AmpPhase(amplitude=amplitude, phase=est.phase)


def phase_project(est: AmpPhase, adv: AmpPhase, mask: np.ndarray, delta: float) -> AmpPhase:
    """Clamp the masked phase of ``est`` into a +-delta band around ``adv``'s phase.

    On masked bins the wrapped difference d = wrap(phi_est - phi_adv) is
    clipped to [-delta, +delta] and re-applied to phi_adv; off-mask bins keep
    phi_est. Amplitudes are untouched. delta is in radians.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    _check_shapes(est, adv)
    m = _broadcast_mask(mask, est.phase.shape)
    d = wrap_phase(est.phase - adv.phase)
    projected = wrap_phase(adv.phase + np.clip(d, -delta, delta))
    phase = np.where(m == 1.0, projected, est.phase)
    return AmpPhase(amplitude=est.amplitude, phase=phase)


def count_phase_clamps(est: AmpPhase, adv: AmpPhase, mask: np.ndarray, delta: float) -> int:
    """Number of masked bins whose phase actually gets clamped by
    :func:`phase_project` (wrapped distance to the adversarial phase > delta).
    """
    _check_shapes(est, adv)
    m = _broadcast_mask(mask, est.phase.shape)
    d = np.abs(wrap_phase(est.phase - adv.phase))
    return int(np.sum((m == 1.0) & (d > delta)))


def enforce_hermitian(spectrum: np.ndarray) -> np.ndarray:
    """Project a centered spectrum onto the Hermitian subspace.

    In unshifted indexing: S <- (S + conj(S[(-u) mod H, (-v) mod W])) / 2.
    Idempotent; fixes the tiny symmetry breakage that phase clamping can
    introduce at Nyquist bins on even-sized grids, so the inverse transform
    is real again.
    """
    spectrum = np.asarray(spectrum, dtype=np.complex128)
    axes = _shifted_axes(spectrum)
    s = np.fft.ifftshift(spectrum, axes=axes)
    h, w = s.shape[0], s.shape[1]
    refl = s[(-np.arange(h)) % h][:, (-np.arange(w)) % w]
    sym = 0.5 * (s + np.conj(refl))
    return np.fft.fftshift(sym, axes=axes)
