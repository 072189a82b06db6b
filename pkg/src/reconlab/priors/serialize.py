"""Versioned binary container for arrays that travel between runs.

Layout: 4-byte magic "RLAB", uint16 version, uint32 header length, UTF-8
JSON header, then the raw array payloads in header order as little-endian
float32. The header records each array's name and shape plus free-form
metadata (family, seed, geometry), so files are self-describing.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from ..core import ImageTensor
from ..diffusion import NoiseSchedule, linear_schedule
from .datasets import DatasetSpec
from .denoiser import ToyDenoiser
from .gmm import GmmPrior

__all__ = [
    "save_container",
    "load_container",
    "save_dataset",
    "load_dataset",
    "save_prior",
    "load_prior",
    "save_denoiser",
    "load_denoiser",
    "ContainerFormatError",
]

_MAGIC = b"RLAB"
_VERSION = 1


class ContainerFormatError(ValueError):
    """File is not a container we can read."""


def save_container(
    path: str | Path,
    kind: str,
    arrays: dict[str, np.ndarray],
    meta: dict[str, Any] | None = None,
) -> None:
    header = {
        "kind": kind,
        "arrays": [
            {"name": name, "shape": list(np.asarray(arr).shape)} for name, arr in arrays.items()
        ],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HI", _VERSION, len(blob)))
        fh.write(blob)
        for name in arrays:
            fh.write(np.ascontiguousarray(arrays[name], dtype="<f4").tobytes())


def load_container(path: str | Path) -> tuple[str, dict[str, np.ndarray], dict[str, Any]]:
    """Returns (kind, arrays as float64, metadata)."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ContainerFormatError(f"bad magic {magic!r} in {path}")
        version, hlen = struct.unpack("<HI", fh.read(6))
        if version != _VERSION:
            raise ContainerFormatError(f"unsupported container version {version}")
        try:
            header = json.loads(fh.read(hlen).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ContainerFormatError(f"corrupt header in {path}: {exc}") from exc
        arrays = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise ContainerFormatError(f"truncated payload for array {entry['name']!r}")
            arrays[entry["name"]] = (
                np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
            )
    return header["kind"], arrays, header.get("meta", {})


def save_dataset(
    path: str | Path,
    spec: DatasetSpec,
    images: list[ImageTensor],
    seed: int | None = None,
) -> None:
    stack = np.stack([im.data for im in images])
    save_container(
        path,
        "dataset",
        {"images": stack},
        meta={
            "family": spec.family,
            "height": spec.height,
            "width": spec.width,
            "channels": spec.channels,
            "seed": spec.seed if seed is None else seed,
        },
    )


def load_dataset(path: str | Path) -> tuple[DatasetSpec, list[ImageTensor]]:
    kind, arrays, meta = load_container(path)
    if kind != "dataset":
        raise ContainerFormatError(f"expected a dataset container, got {kind!r}")
    spec = DatasetSpec(
        family=meta["family"],
        height=meta["height"],
        width=meta["width"],
        channels=meta["channels"],
        seed=meta.get("seed", 0),
    )
    images = [
        ImageTensor(
            height=spec.height,
            width=spec.width,
            channels=spec.channels,
            # float32 round-trip can nudge values a hair past the ends
            data=np.clip(row, 0.0, 1.0),
            clean=True,
        )
        for row in arrays["images"]
    ]
    return spec, images


def save_prior(path: str | Path, prior: GmmPrior, meta: dict[str, Any] | None = None) -> None:
    save_container(
        path,
        "gmm_prior",
        {"weights": prior.weights, "means": prior.means, "variances": prior.variances},
        meta=meta,
    )


def load_prior(path: str | Path) -> tuple[GmmPrior, dict[str, Any]]:
    kind, arrays, meta = load_container(path)
    if kind != "gmm_prior":
        raise ContainerFormatError(f"expected a gmm_prior container, got {kind!r}")
    weights = arrays["weights"]
    # float32 storage perturbs the simplex constraint; renormalize
    prior = GmmPrior(
        weights=weights / weights.sum(),
        means=arrays["means"],
        variances=arrays["variances"],
    )
    return prior, meta


def save_denoiser(path: str | Path, net: ToyDenoiser, meta: dict[str, Any] | None = None) -> None:
    info = dict(meta or {})
    info.update(
        {
            "dimension": net.dimension,
            "shape": list(net.shape),
            "schedule": {
                "num_steps": net.schedule.num_steps,
                "beta_min": float(net.schedule.betas[0]),
                "beta_max": float(net.schedule.betas[-1]),
            },
        }
    )
    save_container(path, "denoiser", dict(net.params), meta=info)


def load_denoiser(path: str | Path) -> ToyDenoiser:
    kind, arrays, meta = load_container(path)
    if kind != "denoiser":
        raise ContainerFormatError(f"expected a denoiser container, got {kind!r}")
    sched_meta = meta["schedule"]
    schedule = linear_schedule(
        num_steps=sched_meta["num_steps"],
        beta_min=sched_meta["beta_min"],
        beta_max=sched_meta["beta_max"],
    )
    return ToyDenoiser(
        schedule=schedule,
        dimension=int(meta["dimension"]),
        shape=tuple(meta["shape"]),
        params=arrays,
    )
