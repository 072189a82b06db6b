"""Shared image container, RNG plumbing and similarity metrics.

Everything downstream works on flat float64 vectors wrapped in ImageTensor.
Latents and noisy observations are allowed to leave [0, 1]; the `clean` flag
is an assertion that a tensor is valid pixel data.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import convolve2d

__all__ = [
    "ImageTensor",
    "Metric",
    "SimilarityScore",
    "make_rng",
    "spawn_seeds",
    "mse",
    "ssim",
    "pairwise_baseline",
    "SSIM_WINDOW",
    "SSIM_SIGMA",
]

# SSIM constants (Wang et al. defaults, dynamic range 1.0).
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic generator from a 64-bit seed."""
    if not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {type(seed).__name__}")
    if seed < 0 or seed > 2**64 - 1:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return np.random.default_rng(int(seed))


def spawn_seeds(seed: int, n: int) -> list[int]:
    """Derive n independent child seeds from a master seed.

    Used wherever one user-facing seed has to drive several internal
    streams (consensus sampling, sweep trials) without correlation.
    """
    ss = np.random.SeedSequence(int(seed))
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in ss.spawn(n)]


@dataclass(frozen=True)
class ImageTensor:
    """Flat row-major image: index (row, col, channel), float64 throughout.

    `clean=True` asserts every value lies in [0, 1]; constructors of
    pixel-space data (datasets, decoded files) set it, latents do not.
    """

    height: int
    width: int
    channels: int
    data: np.ndarray = field(repr=False)
    clean: bool = False

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"bad image shape {self.height}x{self.width}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        arr = np.asarray(self.data, dtype=np.float64).reshape(-1)
        if arr.size != self.height * self.width * self.channels:
            raise ValueError(
                f"data length {arr.size} does not match "
                f"{self.height}x{self.width}x{self.channels}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("image data contains non-finite values")
        if self.clean and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("clean image has values outside [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray, clean: bool = False) -> "ImageTensor":
        """Build from an (H, W) or (H, W, C) array."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D array, got ndim={arr.ndim}")
        h, w, c = arr.shape
        return cls(height=h, width=w, channels=c, data=arr.reshape(-1), clean=clean)

    def as_array(self) -> np.ndarray:
        """Read-only (H, W, C) view."""
        return self.data.reshape(self.height, self.width, self.channels)

    @property
    def size(self) -> int:
        return self.height * self.width * self.channels

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.channels)

    def with_data(self, data: np.ndarray, clean: bool = False) -> "ImageTensor":
        """Same shape, new values."""
        return replace(self, data=np.asarray(data, dtype=np.float64).reshape(-1), clean=clean)

    def clipped(self) -> "ImageTensor":
        """Values clamped to [0, 1], marked clean."""
        return self.with_data(np.clip(self.data, 0.0, 1.0), clean=True)

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))


class Metric(enum.Enum):
    MSE = "mse"
    SSIM = "ssim"


@dataclass(frozen=True)
class SimilarityScore:
    metric: Metric
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.metric.value} score is not finite: {self.value}")
        if self.metric is Metric.MSE and self.value < 0.0:
            raise ValueError(f"mse cannot be negative: {self.value}")
        if self.metric is Metric.SSIM and not (-1.0 - 1e-9 <= self.value <= 1.0 + 1e-9):
            raise ValueError(f"ssim must lie in [-1, 1]: {self.value}")


def _check_same_shape(a: ImageTensor, b: ImageTensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(a: ImageTensor, b: ImageTensor) -> float:
    """Mean squared error over all pixels and channels. Values unclipped."""
    _check_same_shape(a, b)
    d = a.data - b.data
    return float(np.mean(d * d))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


_SSIM_WIN = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)


def _ssim_channel(x: np.ndarray, y: np.ndarray) -> float:
    # Window statistics over every fully-contained 11x11 patch ("valid"),
    # biased variance estimates as in the original formulation.
    win = _SSIM_WIN
    c1 = (_SSIM_K1 * 1.0) ** 2
    c2 = (_SSIM_K2 * 1.0) ** 2
    mu_x = convolve2d(x, win, mode="valid")
    mu_y = convolve2d(y, win, mode="valid")
    xx = convolve2d(x * x, win, mode="valid")
    yy = convolve2d(y * y, win, mode="valid")
    xy = convolve2d(x * y, win, mode="valid")
    var_x = xx - mu_x**2
    var_y = yy - mu_y**2
    cov = xy - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(a: ImageTensor, b: ImageTensor) -> float:
    """Mean structural similarity, Gaussian 11x11 window, sigma 1.5.

    Inputs are clamped to [0, 1] first so the dynamic-range constants stay
    meaningful for latents that wandered out of pixel range; mse() is the
    metric that sees raw values.
    """
    _check_same_shape(a, b)
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise ValueError(
            f"image {a.height}x{a.width} smaller than {SSIM_WINDOW}x{SSIM_WINDOW} ssim window"
        )
    xa = np.clip(a.as_array(), 0.0, 1.0)
    xb = np.clip(b.as_array(), 0.0, 1.0)
    vals = [_ssim_channel(xa[:, :, c], xb[:, :, c]) for c in range(a.channels)]
    return float(np.mean(vals))


def similarity(a: ImageTensor, b: ImageTensor, metric: Metric) -> SimilarityScore:
    if metric is Metric.MSE:
        return SimilarityScore(Metric.MSE, mse(a, b))
    return SimilarityScore(Metric.SSIM, ssim(a, b))


def pairwise_baseline(images: list[ImageTensor], metric: Metric = Metric.MSE) -> float:
    """Mean metric over all unordered pairs of a sample set.

    This is the chance-level reference an attack has to beat: the expected
    similarity between two unrelated draws from the data distribution.
    """
    n = len(images)
    if n < 2:
        raise ValueError("pairwise baseline needs at least two images")
    for im in images[1:]:
        _check_same_shape(images[0], im)
    if metric is Metric.MSE:
        # sum_{i<j} |x_i - x_j|^2 = n * sum |x_i|^2 - |sum x_i|^2, per coordinate.
        stack = np.stack([im.data for im in images])
        sq = np.sum(stack * stack, axis=0)
        total = np.sum(n * sq - np.sum(stack, axis=0) ** 2)
        return float(total / (n * (n - 1) / 2) / stack.shape[1])
    vals = [ssim(images[i], images[j]) for i in range(n) for j in range(i + 1, n)]
    return float(np.mean(vals))
