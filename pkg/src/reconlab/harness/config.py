"""Experiment configuration shared by the CLI, the sweep runner and the
HTTP service.

Everything here is serializable to plain JSON so a sweep manifest can echo
its exact configuration and a dashboard can post one back.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional

from ..core import Metric
from ..priors import DatasetSpec
from ..release import PrivacyParams

__all__ = [
    "AttackMode",
    "ExperimentConfig",
    "GridPoint",
    "PriorSource",
]


class AttackMode(enum.Enum):
    SINGLE = "single"
    BINNING = "batch-binning"
    CONSENSUS = "consensus"


@dataclass(frozen=True)
class PriorSource:
    """Where the attack's prior comes from.

    kind "gmm_fit" fits a mixture on freshly generated training images,
    "toy_denoiser" trains the small network instead, and "exact_gmm"
    loads a serialized mixture from `path` and uses it as-is.
    """

    kind: str = "gmm_fit"
    k: int = 8
    n_train: int = 256
    steps: int = 2000
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("gmm_fit", "toy_denoiser", "exact_gmm"):
            raise ValueError(f"unknown prior source kind {self.kind!r}")
        if self.kind == "exact_gmm" and not self.path:
            raise ValueError("exact_gmm prior needs a path")
        if self.k < 1 or self.n_train < 1 or self.steps < 1:
            raise ValueError("prior source counts must be positive")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "k": self.k, "n_train": self.n_train, "steps": self.steps}
        if self.path is not None:
            out["path"] = self.path
        return out


@dataclass(frozen=True)
class GridPoint:
    """One privacy level, given either as mu or as an explicit (C, sigma).

    mu and sigma are mutually exclusive; clip_norm is shared by both
    forms. mu_equiv reports the release strength C / sigma either way
    (infinite for noiseless releases), which is what the accountant and
    the report columns key on.
    """

    clip_norm: float = 1.0
    mu: Optional[float] = None
    sigma: Optional[float] = None

    def __post_init__(self):
        if (self.mu is None) == (self.sigma is None):
            raise ValueError("give exactly one of mu or sigma")
        if self.mu is not None and self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.sigma is not None and self.sigma < 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if self.clip_norm <= 0.0:
            raise ValueError(f"clip_norm must be positive, got {self.clip_norm}")

    @property
    def params(self) -> PrivacyParams:
        if self.mu is not None:
            return PrivacyParams.from_mu(self.mu, clip_norm=self.clip_norm)
        return PrivacyParams(clip_norm=self.clip_norm, sigma=self.sigma)

    @property
    def mu_equiv(self) -> float:
        if self.mu is not None:
            return self.mu
        if self.sigma == 0.0:
            return float("inf")
        return self.clip_norm / self.sigma

    @property
    def label(self) -> str:
        if self.mu is not None:
            return f"mu={self.mu:g}"
        return f"C={self.clip_norm:g},sigma={self.sigma:g}"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"clip_norm": self.clip_norm}
        if self.mu is not None:
            out["mu"] = self.mu
        else:
            out["sigma"] = self.sigma
        return out


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a sweep: data, prior, privacy grid, attack mode,
    metrics, trial count, seed and where the report lands.
    """

    dataset: DatasetSpec = field(default_factory=lambda: DatasetSpec(family="blobs_a"))
    prior: PriorSource = field(default_factory=PriorSource)
    grid: tuple[GridPoint, ...] = ()
    mode: AttackMode = AttackMode.SINGLE
    consensus_k: int = 5
    metrics: tuple[Metric, ...] = (Metric.MSE,)
    trials: int = 20
    seed: int = 0
    output_dir: str = "reports"

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if not self.grid:
            raise ValueError("privacy grid is empty")
        if not self.metrics:
            raise ValueError("need at least one metric")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.mode is AttackMode.CONSENSUS and self.consensus_k < 2:
            raise ValueError("consensus mode needs k >= 2")

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": {
                "family": self.dataset.family,
                "height": self.dataset.height,
                "width": self.dataset.width,
                "channels": self.dataset.channels,
                "seed": self.dataset.seed,
            },
            "prior": self.prior.to_dict(),
            "grid": [g.to_dict() for g in self.grid],
            "mode": self.mode.value,
            "consensus_k": self.consensus_k,
            "metrics": [m.value for m in self.metrics],
            "trials": self.trials,
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        known = {
            "dataset",
            "prior",
            "grid",
            "mode",
            "consensus_k",
            "metrics",
            "trials",
            "seed",
            "output_dir",
        }
        extra = set(raw) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        kwargs: dict[str, Any] = {}
        if "dataset" in raw:
            kwargs["dataset"] = DatasetSpec(**raw["dataset"])
        if "prior" in raw:
            kwargs["prior"] = PriorSource(**raw["prior"])
        if "grid" in raw:
            kwargs["grid"] = tuple(GridPoint(**g) for g in raw["grid"])
        if "mode" in raw:
            kwargs["mode"] = AttackMode(raw["mode"])
        if "metrics" in raw:
            kwargs["metrics"] = tuple(Metric(m) for m in raw["metrics"])
        for key in ("consensus_k", "trials", "seed", "output_dir"):
            if key in raw:
                kwargs[key] = raw[key]
        return cls(**kwargs)
