"""Frequency-anchored diffusion purification of adversarial images.

The package groups into:

- :mod:`spectralpurify.spectra` -- 2-D DFT, amplitude/phase surgery, masks
- :mod:`spectralpurify.diffusion` -- noise schedule, forward/reverse steps,
  analytic Gaussian-mixture denoiser
- :mod:`spectralpurify.purifier` -- the per-step low-frequency-anchored
  reverse loop
- :mod:`spectralpurify.theory` -- spectral-damage variance predictions and
  their Monte-Carlo oracles
- :mod:`spectralpurify.attacks` -- toy classifiers, FGSM/PGD, evaluation
- :mod:`spectralpurify.datasets`, :mod:`spectralpurify.experiment`,
  :mod:`spectralpurify.cli` -- data generation and the experiment harness
"""

from . import attacks, datasets, diffusion, io_formats, purifier, spectra, theory

__all__ = [
    "attacks",
    "datasets",
    "diffusion",
    "io_formats",
    "purifier",
    "spectra",
    "theory",
]

__version__ = "0.1.0"
