"""Per-sample gradient release: clip to norm C, add N(0, C^2 sigma^2) noise.

The released vector is x / lambda + xi with lambda = max(|x|_2 / C, 1).
An adversary who knows lambda can rescale and faces pixel-space noise of
standard deviation C * sigma * lambda; mu = C / sigma is the dimensionless
signal-to-noise knob used across the sweep tooling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ImageTensor, make_rng

__all__ = [
    "PrivacyParams",
    "PrivatizedObservation",
    "clip_factor",
    "privatize",
    "ziller_mse_bound",
]


@dataclass(frozen=True)
class PrivacyParams:
    """Clipping norm C > 0 and relative noise multiplier sigma >= 0."""

    clip_norm: float
    sigma: float

    def __post_init__(self):
        if not (self.clip_norm > 0.0 and np.isfinite(self.clip_norm)):
            raise ValueError(f"clip_norm must be positive, got {self.clip_norm}")
        if not (self.sigma >= 0.0 and np.isfinite(self.sigma)):
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")

    @property
    def mu(self) -> float:
        """Signal-to-noise ratio C / sigma; infinite when sigma = 0."""
        if self.sigma == 0.0:
            return float("inf")
        return self.clip_norm / self.sigma

    @property
    def noise_std(self) -> float:
        """Per-coordinate noise standard deviation C * sigma."""
        return self.clip_norm * self.sigma

    @classmethod
    def from_mu(cls, mu: float, clip_norm: float = 1.0) -> "PrivacyParams":
        if not (mu > 0.0):
            raise ValueError(f"mu must be positive, got {mu}")
        return cls(clip_norm=clip_norm, sigma=clip_norm / mu)


@dataclass(frozen=True)
class PrivatizedObservation:
    """One released sample together with what the adversary may know.

    `lam` is the clipping factor actually applied; None models the
    adversary-view variant where it has to be estimated downstream.
    """

    x_priv: ImageTensor
    params: PrivacyParams
    lam: Optional[float] = None

    def __post_init__(self):
        if self.lam is not None and self.lam < 1.0:
            raise ValueError(f"clip factor must be >= 1, got {self.lam}")

    @property
    def noise_std(self) -> float:
        return self.params.noise_std

    def without_lambda(self) -> "PrivatizedObservation":
        """Adversary view: same release, clip factor withheld."""
        return PrivatizedObservation(x_priv=self.x_priv, params=self.params, lam=None)


def clip_factor(x: ImageTensor, clip_norm: float) -> float:
    """lambda = max(|x|_2 / C, 1); dividing by it caps the norm at C."""
    if clip_norm <= 0.0:
        raise ValueError(f"clip_norm must be positive, got {clip_norm}")
    return max(x.norm() / clip_norm, 1.0)


def privatize(
    x: ImageTensor,
    params: PrivacyParams,
    seed: int,
    reveal_lambda: bool = True,
) -> PrivatizedObservation:
    """Release x / lambda + N(0, C^2 sigma^2 I) under a fixed seed.

    Requires clean pixel input; latents are not a thing this mechanism
    releases. sigma = 0 degenerates to deterministic clipping only.
    """
    if not x.clean:
        raise ValueError("privatize expects a clean image (values in [0, 1])")
    lam = clip_factor(x, params.clip_norm)
    noisy = x.data / lam
    if params.sigma > 0.0:
        rng = make_rng(seed)
        noisy = noisy + rng.normal(0.0, params.noise_std, size=x.size)
    released = x.with_data(noisy, clean=False)
    return PrivatizedObservation(
        x_priv=released,
        params=params,
        lam=lam if reveal_lambda else None,
    )


def ziller_mse_bound(params: PrivacyParams) -> float:
    """Lower bound C^2 sigma^2 on E[mse(x, x_priv)] for any unbiased-scale
    attacker; equality holds exactly when the sample was not clipped
    (lambda = 1), clipping only adds bias on top of the noise floor.

    sigma = 0 has no noise floor and no meaningful bound.
    """
    if params.sigma == 0.0:
        raise ValueError("mse bound is degenerate at sigma = 0")
    return params.clip_norm**2 * params.sigma**2
