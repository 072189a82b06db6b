"""reconlab: a desk-scale laboratory for reconstruction attacks on
differentially private gradient releases.

Simulates per-sample DP releases (clip + Gaussian noise), runs diffusion-
prior reconstruction attacks against them with exactly verifiable
mixture-model denoisers, and compares the results to matching and wavelet
baselines under a Renyi privacy accountant.
"""

__version__ = "0.1.0"

from . import accountant, baselines, core, diffusion, imprint, priors, release

__all__ = [
    "accountant",
    "baselines",
    "core",
    "diffusion",
    "imprint",
    "priors",
    "release",
    "__version__",
]
