"""Small fully-connected noise predictor trained from scratch in numpy.

Two tanh hidden layers on top of the latent concatenated with a 16-wide
sinusoidal embedding of the step index. Gradients are written out by hand
(the network is four matrix multiplies, autograd would be overkill here)
and optimized with Adam on the usual eps-matching objective
  E || eps - net(sqrt(ab_t) x0 + sqrt(1-ab_t) eps, t) ||^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ImageTensor, make_rng
from ..diffusion import NoiseSchedule

__all__ = [
    "TEMB_WIDTH",
    "ToyDenoiser",
    "TrainConfig",
    "TrainingDivergedError",
    "train_toy_denoiser",
    "time_embedding",
]

TEMB_WIDTH = 16


class TrainingDivergedError(RuntimeError):
    """Loss went non-finite; step size or data scale is off."""


def time_embedding(t: int) -> np.ndarray:
    """Sin/cos features of the raw step index at 8 geometric frequencies."""
    half = TEMB_WIDTH // 2
    freqs = 10000.0 ** (-np.arange(half) / half)
    angles = t * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)])


@dataclass
class ToyDenoiser:
    """Weights of the 2-hidden-layer eps-predictor for one fixed schedule."""

    schedule: NoiseSchedule
    dimension: int
    shape: tuple[int, int, int]
    params: dict[str, np.ndarray] = field(repr=False)
    config: "TrainConfig | None" = None

    def _forward(self, xb: np.ndarray, tb: np.ndarray, keep: bool = False):
        """Batched forward pass; optionally keeps activations for backprop."""
        emb = np.stack([time_embedding(int(t)) for t in tb])
        z0 = np.concatenate([xb, emb], axis=1)
        p = self.params
        a1 = z0 @ p["w1"].T + p["b1"]
        h1 = np.tanh(a1)
        a2 = h1 @ p["w2"].T + p["b2"]
        h2 = np.tanh(a2)
        out = h2 @ p["w3"].T + p["b3"]
        if keep:
            return out, (z0, h1, h2)
        return out

    def predict_noise(self, x_t: ImageTensor, t: int) -> ImageTensor:
        if x_t.size != self.dimension:
            raise ValueError(f"denoiser expects dimension {self.dimension}, got {x_t.size}")
        self.schedule._check_step(t)
        out = self._forward(x_t.data[None, :], np.array([t]))
        return x_t.with_data(out[0])


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 4000
    step_size: float = 1e-3
    batch_size: int = 64
    hidden: tuple[int, int] = (128, 128)
    seed: int = 0
    n_train: int = 256  # dataset size when training from a DatasetSpec

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.n_train < 1:
            raise ValueError("steps, batch_size and n_train must be positive")
        if not (0.0 < self.step_size < 1.0):
            raise ValueError(f"implausible step size {self.step_size}")


def _init_params(dim: int, hidden: tuple[int, int], rng: np.random.Generator):
    h1, h2 = hidden
    d_in = dim + TEMB_WIDTH
    scale = lambda fan_in: 1.0 / np.sqrt(fan_in)
    return {
        "w1": rng.normal(0.0, scale(d_in), size=(h1, d_in)),
        "b1": np.zeros(h1),
        "w2": rng.normal(0.0, scale(h1), size=(h2, h1)),
        "b2": np.zeros(h2),
        "w3": rng.normal(0.0, scale(h2), size=(dim, h2)),
        "b3": np.zeros(dim),
    }


def _backward(net: ToyDenoiser, cache, delta: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the loss given d(loss)/d(out) = delta."""
    z0, h1, h2 = cache
    p = net.params
    grads = {}
    grads["w3"] = delta.T @ h2
    grads["b3"] = delta.sum(axis=0)
    d_h2 = delta @ p["w3"]
    d_a2 = d_h2 * (1.0 - h2 * h2)
    grads["w2"] = d_a2.T @ h1
    grads["b2"] = d_a2.sum(axis=0)
    d_h1 = d_a2 @ p["w2"]
    d_a1 = d_h1 * (1.0 - h1 * h1)
    grads["w1"] = d_a1.T @ z0
    grads["b1"] = d_a1.sum(axis=0)
    return grads


def train_toy_denoiser(
    source,
    schedule: NoiseSchedule,
    config: TrainConfig = TrainConfig(),
) -> tuple[ToyDenoiser, list[float]]:
    """Fit the predictor; returns (denoiser, loss history).

    `source` is either a DatasetSpec (config.n_train images are generated
    from it) or an explicit list of images. Deterministic in config.seed:
    initialization, batch order and noise draws all come from one
    generator.
    """
    if hasattr(source, "family"):
        from .datasets import generate_dataset

        images = generate_dataset(source, config.n_train)
    else:
        images = list(source)
    if not images:
        raise ValueError("training set is empty")
    shape = images[0].shape
    data = np.stack([im.data for im in images])
    n, dim = data.shape
    rng = make_rng(config.seed)
    net = ToyDenoiser(
        schedule=schedule,
        dimension=dim,
        shape=shape,
        params=_init_params(dim, config.hidden, rng),
        config=config,
    )
    # Adam state
    m = {k: np.zeros_like(v) for k, v in net.params.items()}
    v = {k: np.zeros_like(vv) for k, vv in net.params.items()}
    beta1, beta2, eps_adam = 0.9, 0.999, 1e-8
    big_t = schedule.num_steps
    losses = []
    for step in range(1, config.steps + 1):
        idx = rng.integers(0, n, size=config.batch_size)
        x0 = data[idx]
        tb = rng.integers(1, big_t + 1, size=config.batch_size)
        ab = np.array([schedule.alpha_bar(int(t)) for t in tb])[:, None]
        noise = rng.standard_normal(x0.shape)
        xt = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise
        out, cache = net._forward(xt, tb, keep=True)
        resid = out - noise
        loss = float(np.mean(resid * resid))
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss became {loss} at step {step}")
        losses.append(loss)
        delta = 2.0 * resid / resid.size
        grads = _backward(net, cache, delta)
        for key in net.params:
            m[key] = beta1 * m[key] + (1.0 - beta1) * grads[key]
            v[key] = beta2 * v[key] + (1.0 - beta2) * grads[key] ** 2
            m_hat = m[key] / (1.0 - beta1**step)
            v_hat = v[key] / (1.0 - beta2**step)
            net.params[key] -= config.step_size * m_hat / (np.sqrt(v_hat) + eps_adam)
    return net, losses
