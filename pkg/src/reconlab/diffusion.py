"""Variance-preserving diffusion engine and the noisy-observation attack.

A rescaled release x + lambda*xi is one Gaussian corruption away from a
forward-diffusion state: dividing by sqrt(1 + sigma_t^2) at the step t whose
variance-exploding noise level sigma_t = sqrt(1/alpha_bar_t - 1) first
exceeds the observed level turns it into a valid x_t. From there the
standard reverse process (deterministic DDIM or stochastic DDPM) acts as
the reconstruction attack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from .core import ImageTensor, Metric, SimilarityScore, make_rng, mse, spawn_seeds, ssim
from .release import PrivatizedObservation

__all__ = [
    "NoiseSchedule",
    "NoisePredictor",
    "ReconstructionResult",
    "ConsensusResult",
    "ScheduleOverflowError",
    "MissingLambdaError",
    "linear_schedule",
    "forward_diffuse",
    "match_markov_state",
    "reparameterize",
    "ddim_step",
    "ddpm_step",
    "reconstruct",
    "consensus_reconstruct",
]


class ScheduleOverflowError(ValueError):
    """Observed noise level exceeds what the schedule can absorb."""


class MissingLambdaError(ValueError):
    """Reconstruction needs a clip factor but the observation carries none."""


@dataclass(frozen=True)
class NoiseSchedule:
    """Betas for steps 1..T plus cached alpha-bar and VE noise levels.

    Arrays are indexed [t-1] for step t; accessors take the 1-based step
    and treat t = 0 as the clean boundary (alpha_bar = 1, sigma = 0).
    """

    betas: np.ndarray
    alpha_bars: np.ndarray = field(repr=False)
    sigmas: np.ndarray = field(repr=False)

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=np.float64)
        ab = np.asarray(self.alpha_bars, dtype=np.float64)
        sig = np.asarray(self.sigmas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ValueError("betas must be a non-empty 1-D array")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ValueError("betas must lie strictly inside (0, 1)")
        if ab.shape != betas.shape or sig.shape != betas.shape:
            raise ValueError("alpha_bars / sigmas must match betas in length")
        if np.any(np.diff(ab) >= 0.0) or ab[0] >= 1.0 or ab[-1] <= 0.0:
            raise ValueError("alpha_bars must decrease strictly inside (0, 1)")
        if np.any(np.diff(sig) <= 0.0):
            raise ValueError("sigmas must increase strictly")
        # The two parameterizations must describe the same schedule.
        expected = np.sqrt(1.0 / ab - 1.0)
        if np.any(np.abs(sig - expected) > 1e-12 * np.maximum(expected, 1e-300)):
            raise ValueError("sigmas inconsistent with alpha_bars beyond 1e-12 relative")
        for name, arr in (("betas", betas), ("alpha_bars", ab), ("sigmas", sig)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_steps(self) -> int:
        return int(self.betas.size)

    def _check_step(self, t: int, lo: int = 1) -> None:
        if not lo <= t <= self.num_steps:
            raise ValueError(f"step {t} outside [{lo}, {self.num_steps}]")

    def beta(self, t: int) -> float:
        self._check_step(t)
        return float(self.betas[t - 1])

    def alpha_bar(self, t: int) -> float:
        self._check_step(t, lo=0)
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])

    def sigma(self, t: int) -> float:
        self._check_step(t, lo=0)
        return 0.0 if t == 0 else float(self.sigmas[t - 1])


def linear_schedule(
    num_steps: int = 1000,
    beta_min: float = 1e-4,
    beta_max: float = 0.02,
) -> NoiseSchedule:
    """Linearly spaced betas; the usual 1000-step 1e-4..0.02 ramp by default.

    beta_min = beta_max is accepted and gives a constant-beta schedule.
    """
    if num_steps < 2:
        raise ValueError(f"num_steps must be >= 2, got {num_steps}")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ValueError(f"need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]")
    betas = np.linspace(beta_min, beta_max, num_steps)
    alpha_bars = np.cumprod(1.0 - betas)
    sigmas = np.sqrt(1.0 / alpha_bars - 1.0)
    return NoiseSchedule(betas=betas, alpha_bars=alpha_bars, sigmas=sigmas)


@runtime_checkable
class NoisePredictor(Protocol):
    """Anything that maps a latent and a step to a noise estimate."""

    def predict_noise(self, x_t: ImageTensor, t: int) -> ImageTensor: ...


def forward_diffuse(x0: ImageTensor, t: int, schedule: NoiseSchedule, seed: int) -> ImageTensor:
    """x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps with eps ~ N(0, I)."""
    schedule._check_step(t)
    ab = schedule.alpha_bar(t)
    eps = make_rng(seed).standard_normal(x0.size)
    return x0.with_data(np.sqrt(ab) * x0.data + np.sqrt(1.0 - ab) * eps)


def match_markov_state(sigma_hat: float, schedule: NoiseSchedule) -> int:
    """Smallest step t whose noise level sigma_t strictly exceeds sigma_hat.

    Raises ScheduleOverflowError when even sigma_T is not above the
    observed level; sigma_hat below sigma_1 maps to t = 1 (the caller is
    expected to short-circuit that case before matching).
    """
    if not (sigma_hat >= 0.0 and np.isfinite(sigma_hat)):
        raise ValueError(f"sigma_hat must be finite and nonnegative, got {sigma_hat}")
    # index of the first sigma_t > sigma_hat; ties resolve upward so the
    # matched state always has strictly more noise than the observation.
    idx = int(np.searchsorted(schedule.sigmas, sigma_hat, side="right"))
    if idx >= schedule.num_steps:
        raise ScheduleOverflowError(
            f"observed noise level {sigma_hat:.6g} is not below the schedule "
            f"ceiling sigma_T = {schedule.sigma(schedule.num_steps):.6g}"
        )
    return idx + 1


def reparameterize(
    obs: PrivatizedObservation,
    t_start: int,
    schedule: NoiseSchedule,
    lambda_hint: Optional[float] = None,
) -> ImageTensor:
    """Map a rescaled release onto the diffusion state at t_start.

    x_t = lambda * x_priv / sqrt(1 + sigma_t^2); the division converts a
    variance-exploding observation into the variance-preserving latent the
    reverse process expects.
    """
    lam = obs.lam if obs.lam is not None else lambda_hint
    if lam is None:
        raise MissingLambdaError("observation carries no clip factor and no hint was given")
    schedule._check_step(t_start)
    s2 = schedule.sigma(t_start) ** 2
    return obs.x_priv.with_data(lam * obs.x_priv.data / np.sqrt(1.0 + s2))


def _predict(predictor: NoisePredictor, x_t: ImageTensor, t: int) -> np.ndarray:
    eps = predictor.predict_noise(x_t, t)
    if eps.shape != x_t.shape:
        raise ValueError(f"predictor returned shape {eps.shape} for input {x_t.shape}")
    return eps.data


def ddim_step(
    x_t: ImageTensor,
    t: int,
    schedule: NoiseSchedule,
    predictor: NoisePredictor,
    t_prev: Optional[int] = None,
) -> ImageTensor:
    """One deterministic reverse step t -> t_prev (default t-1).

    Predicts x0 from the noise estimate, then re-noises to the target
    level:
      x_{t_prev} = sqrt(ab_{t_prev}) * x0_hat + sqrt(1 - ab_{t_prev}) * eps_hat.
    t_prev below t-1 is the accelerated striding variant.
    """
    schedule._check_step(t)
    if t_prev is None:
        t_prev = t - 1
    if not 0 <= t_prev < t:
        raise ValueError(f"t_prev = {t_prev} must lie in [0, {t})")
    ab_t = schedule.alpha_bar(t)
    ab_prev = schedule.alpha_bar(t_prev)
    eps = _predict(predictor, x_t, t)
    x0_hat = (x_t.data - np.sqrt(1.0 - ab_t) * eps) / np.sqrt(ab_t)
    out = np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps
    return x_t.with_data(out)


def _ddpm_step_rng(
    x_t: ImageTensor,
    t: int,
    schedule: NoiseSchedule,
    predictor: NoisePredictor,
    rng: np.random.Generator,
) -> ImageTensor:
    schedule._check_step(t)
    beta = schedule.beta(t)
    ab_t = schedule.alpha_bar(t)
    ab_prev = schedule.alpha_bar(t - 1)
    alpha = 1.0 - beta
    eps = _predict(predictor, x_t, t)
    mean = (x_t.data - beta / np.sqrt(1.0 - ab_t) * eps) / np.sqrt(alpha)
    if t == 1:
        # terminal step is deterministic; drawing here would corrupt x0
        return x_t.with_data(mean)
    beta_tilde = beta * (1.0 - ab_prev) / (1.0 - ab_t)
    z = rng.standard_normal(x_t.size)
    return x_t.with_data(mean + np.sqrt(beta_tilde) * z)


def ddpm_step(
    x_t: ImageTensor,
    t: int,
    schedule: NoiseSchedule,
    predictor: NoisePredictor,
    seed: int,
) -> ImageTensor:
    """One stochastic ancestral reverse step t -> t-1 under a fixed seed."""
    return _ddpm_step_rng(x_t, t, schedule, predictor, make_rng(seed))


@dataclass(frozen=True)
class ReconstructionResult:
    """Attack output plus the trace needed to audit it.

    t_start = num_steps = 0 marks the no-op branch where the observed
    noise sat below sigma_1 and the rescaled observation was returned
    untouched.
    """

    image: ImageTensor
    t_start: int
    lambda_used: float
    num_steps: int
    mode: str
    sigma_hat: float
    stride: int = 1

    def __post_init__(self):
        if self.t_start < 0:
            raise ValueError(f"negative t_start {self.t_start}")
        expected = -(-self.t_start // self.stride)  # ceil division
        if self.num_steps != expected:
            raise ValueError(
                f"expected {expected} reverse steps for t_start {self.t_start} "
                f"at stride {self.stride}, recorded {self.num_steps}"
            )


def reconstruct(
    obs: PrivatizedObservation,
    schedule: NoiseSchedule,
    predictor: NoisePredictor,
    mode: str = "ddim",
    seed: int = 0,
    lambda_hint: Optional[float] = None,
    stride: int = 1,
) -> ReconstructionResult:
    """Run the full attack on one release with known (or hinted) lambda.

    Rescales by lambda, matches the noise level C*sigma*lambda to a
    schedule step, reparameterizes, then reverses down to x0. `mode` is
    "ddim" (deterministic) or "ddpm" (ancestral; consumes `seed`).
    stride > 1 enables accelerated DDIM traversal; the default walks
    every step.
    """
    if mode not in ("ddim", "ddpm"):
        raise ValueError(f"mode must be 'ddim' or 'ddpm', got {mode!r}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if stride > 1 and mode != "ddim":
        raise ValueError("accelerated striding only applies to ddim mode")
    lam = obs.lam if obs.lam is not None else lambda_hint
    if lam is None:
        raise MissingLambdaError("observation carries no clip factor and no hint was given")
    sigma_hat = obs.params.noise_std * lam
    if sigma_hat < schedule.sigma(1):
        # below the schedule floor there is nothing to denoise
        rescaled = obs.x_priv.with_data(lam * obs.x_priv.data)
        return ReconstructionResult(
            image=rescaled,
            t_start=0,
            lambda_used=lam,
            num_steps=0,
            mode=mode,
            sigma_hat=sigma_hat,
            stride=stride,
        )
    t_start = match_markov_state(sigma_hat, schedule)
    x = reparameterize(obs, t_start, schedule, lambda_hint=lam)
    rng = make_rng(seed)
    num_steps = 0
    t = t_start
    while t > 0:
        if mode == "ddim":
            x = ddim_step(x, t, schedule, predictor, t_prev=max(t - stride, 0))
        else:
            x = _ddpm_step_rng(x, t, schedule, predictor, rng)
        t -= stride
        num_steps += 1
    return ReconstructionResult(
        image=x,
        t_start=t_start,
        lambda_used=lam,
        num_steps=num_steps,
        mode=mode,
        sigma_hat=sigma_hat,
        stride=stride,
    )


@dataclass(frozen=True)
class ConsensusResult:
    """Median-of-samples reconstruction and its internal agreement score."""

    image: ImageTensor
    samples: tuple[ImageTensor, ...]
    mean_pairwise: SimilarityScore


def consensus_reconstruct(
    obs: PrivatizedObservation,
    schedule: NoiseSchedule,
    predictor: NoisePredictor,
    k: int = 5,
    seed: int = 0,
    metric: Metric = Metric.MSE,
    sample_seeds: Optional[Sequence[int]] = None,
) -> ConsensusResult:
    """k independent DDPM attacks, aggregated per pixel by the median.

    The mean pairwise similarity of the samples is a reconstruction-success
    estimate that needs no ground truth: tight agreement means the noise
    level still pins down the image, wide spread means the prior is doing
    the talking.
    """
    if k < 2:
        raise ValueError(f"consensus needs k >= 2 samples, got {k}")
    seeds = list(sample_seeds) if sample_seeds is not None else spawn_seeds(seed, k)
    if len(seeds) != k:
        raise ValueError(f"expected {k} sample seeds, got {len(seeds)}")
    samples = [
        reconstruct(obs, schedule, predictor, mode="ddpm", seed=s).image for s in seeds
    ]
    stack = np.stack([s.data for s in samples])
    consensus = samples[0].with_data(np.median(stack, axis=0))
    score = mse if metric is Metric.MSE else ssim
    vals = [
        score(samples[i], samples[j])
        for i in range(k)
        for j in range(i + 1, k)
    ]
    return ConsensusResult(
        image=consensus,
        samples=tuple(samples),
        mean_pairwise=SimilarityScore(metric, float(np.mean(vals))),
    )
