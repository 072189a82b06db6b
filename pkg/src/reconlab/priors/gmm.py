"""Isotropic Gaussian-mixture prior with a closed-form noise predictor.

Under the forward process x_t = sqrt(ab_t) x0 + sqrt(1-ab_t) eps, a mixture
component N(m_i, s_i^2 I) stays Gaussian at every step with mean
sqrt(ab_t) m_i and variance v_i = ab_t s_i^2 + (1 - ab_t). The marginal
score is therefore exact, which makes this prior the ground truth that
learned denoisers are checked against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from ..core import ImageTensor, make_rng
from ..diffusion import NoiseSchedule

__all__ = [
    "GmmPrior",
    "GmmScorePredictor",
    "gmm_predictor",
    "gmm_sample",
    "fit_gmm",
    "VARIANCE_FLOOR",
]

VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class GmmPrior:
    """weights (k,), means (k, D), isotropic variances (k,)."""

    weights: np.ndarray
    means: np.ndarray = field(repr=False)
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        v = np.asarray(self.variances, dtype=np.float64)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("weights must be a non-empty 1-D array")
        if not np.isclose(w.sum(), 1.0, atol=1e-9) or np.any(w < 0.0):
            raise ValueError("weights must be nonnegative and sum to 1")
        if m.ndim != 2 or m.shape[0] != w.size:
            raise ValueError(f"means must be (k, D) with k = {w.size}")
        if v.shape != w.shape or np.any(v < 0.0):
            raise ValueError("variances must be (k,) and nonnegative")
        for name, arr in (("weights", w), ("means", m), ("variances", v)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_components(self) -> int:
        return int(self.weights.size)

    @property
    def dimension(self) -> int:
        return int(self.means.shape[1])


class GmmScorePredictor:
    """Exact eps-predictor for a GMM prior on a fixed schedule.

    eps_hat(x, t) = -sqrt(1 - ab_t) * score_t(x), where score_t is the
    gradient of the log marginal at step t. Also exposes the marginal
    log-density itself, which the clip-factor search uses for scoring.
    """

    def __init__(self, prior: GmmPrior, schedule: NoiseSchedule):
        self.prior = prior
        self.schedule = schedule
        with np.errstate(divide="ignore"):  # zero weights are legal
            self._log_weights = np.log(prior.weights)

    def _moments(self, t: int) -> tuple[float, np.ndarray, np.ndarray]:
        ab = self.schedule.alpha_bar(t)
        a = np.sqrt(ab)
        # per-component marginal variance at step t; strictly positive for
        # t >= 1 even when a component has zero prior variance
        v = ab * self.prior.variances + (1.0 - ab)
        return a, a * self.prior.means, v

    def _log_component_densities(self, x: np.ndarray, t: int) -> np.ndarray:
        if x.size != self.prior.dimension:
            raise ValueError(
                f"latent dimension {x.size} does not match prior dimension "
                f"{self.prior.dimension}"
            )
        _, means_t, v = self._moments(t)
        d = x.size
        diff = x[None, :] - means_t
        sq = np.sum(diff * diff, axis=1)
        return self._log_weights - 0.5 * d * np.log(2.0 * np.pi * v) - 0.5 * sq / v

    def log_density(self, x: ImageTensor, t: int) -> float:
        """Log of the step-t marginal p_t at x."""
        self.schedule._check_step(t)
        return float(logsumexp(self._log_component_densities(x.data, t)))

    def score(self, x: ImageTensor, t: int) -> ImageTensor:
        """grad_x log p_t(x) via responsibility-weighted component scores."""
        self.schedule._check_step(t)
        _, means_t, v = self._moments(t)
        logp = self._log_component_densities(x.data, t)
        resp = np.exp(logp - logsumexp(logp))
        grads = (means_t - x.data[None, :]) / v[:, None]
        return x.with_data(resp @ grads)

    def predict_noise(self, x_t: ImageTensor, t: int) -> ImageTensor:
        ab = self.schedule.alpha_bar(t)
        s = self.score(x_t, t)
        return x_t.with_data(-np.sqrt(1.0 - ab) * s.data)


def gmm_predictor(prior: GmmPrior, schedule: NoiseSchedule) -> GmmScorePredictor:
    return GmmScorePredictor(prior, schedule)


def gmm_sample(
    prior: GmmPrior,
    n: int,
    seed: int,
    shape: Optional[tuple[int, int, int]] = None,
) -> list[ImageTensor]:
    """n iid draws; component indices first, then the Gaussian coordinates.

    shape defaults to (1, D, 1) when the caller does not say how to fold
    the flat dimension into an image.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    d = prior.dimension
    if shape is None:
        shape = (1, d, 1)
    h, w, c = shape
    if h * w * c != d:
        raise ValueError(f"shape {shape} incompatible with dimension {d}")
    rng = make_rng(seed)
    comps = rng.choice(prior.num_components, size=n, p=prior.weights)
    out = []
    for i in range(n):
        ci = comps[i]
        x = prior.means[ci] + np.sqrt(prior.variances[ci]) * rng.standard_normal(d)
        out.append(ImageTensor(height=h, width=w, channels=c, data=x))
    return out


def _kmeans_pp_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Spread-out initial means: first uniform, then farthest-biased."""
    n = data.shape[0]
    centers = [data[rng.integers(n)]]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((data - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0.0:
            centers.append(data[rng.integers(n)])
            continue
        centers.append(data[rng.choice(n, p=d2 / total)])
    return np.stack(centers)


def fit_gmm(
    data: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 200,
    tol: float = 1e-8,
) -> GmmPrior:
    """EM for k isotropic components on an (n, D) data matrix.

    Variances are floored at VARIANCE_FLOOR so degenerate clusters stay
    usable as priors; the fit is deterministic given the seed.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise ValueError("data must be a non-empty (n, D) matrix")
    n, d = data.shape
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n} components, got {k}")
    rng = make_rng(seed)
    means = _kmeans_pp_init(data, k, rng)
    global_var = max(float(np.var(data)), VARIANCE_FLOOR)
    variances = np.full(k, global_var)
    weights = np.full(k, 1.0 / k)

    prev_ll = -np.inf
    for _ in range(max_iter):
        # E step in log space
        diff2 = (
            np.sum(data * data, axis=1)[:, None]
            - 2.0 * data @ means.T
            + np.sum(means * means, axis=1)[None, :]
        )
        logp = (
            np.log(weights)[None, :]
            - 0.5 * d * np.log(2.0 * np.pi * variances)[None, :]
            - 0.5 * diff2 / variances[None, :]
        )
        norm = logsumexp(logp, axis=1)
        ll = float(norm.sum())
        resp = np.exp(logp - norm[:, None])
        # M step
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-12)
        weights = nk / n
        means = (resp.T @ data) / nk[:, None]
        diff2 = (
            np.sum(data * data, axis=1)[:, None]
            - 2.0 * data @ means.T
            + np.sum(means * means, axis=1)[None, :]
        )
        variances = np.maximum(np.sum(resp * diff2, axis=0) / (nk * d), VARIANCE_FLOOR)
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll
    return GmmPrior(weights=weights, means=means, variances=variances)


def fit_gmm_from_dataset(spec, k: int, seed: int, n_train: int = 512) -> GmmPrior:
    """Fit a prior directly from a dataset description.

    Samples n_train images from the generator seeded off the fit seed, so
    calling twice with the same arguments returns the same prior.
    """
    from .datasets import generate_dataset

    images = generate_dataset(spec, n_train, seed=seed)
    data = np.stack([im.data for im in images])
    return fit_gmm(data, k, seed=seed + 1)
