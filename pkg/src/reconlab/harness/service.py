"""Local HTTP service for interactive auditing.

JSON in, JSON out; images travel as base64 PNG. All attack math runs in
the core modules, the service only routes. Loaded datasets and priors are
immutable once cached; the job table is the single mutable structure and
every access holds its lock. Non-finite numbers are serialized as the
strings "inf", "-inf" and "nan" so payloads stay valid strict JSON.
"""

from __future__ import annotations

import base64
import binascii
import dataclasses
import os
import threading
from pathlib import Path
from typing import Any, Literal, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, model_validator

from ..accountant import AccountantConfig, AccountingOverflowError, mu_to_epsilon
from ..baselines import approximate_lambda
from ..core import SSIM_WINDOW, ImageTensor, mse, ssim
from ..diffusion import (
    ScheduleOverflowError,
    consensus_reconstruct,
    linear_schedule,
    reconstruct,
)
from ..priors import (
    ContainerFormatError,
    DatasetSpec,
    GmmPrior,
    generate_dataset,
    gmm_predictor,
    load_container,
    load_dataset,
    load_denoiser,
    load_prior,
)
from ..release import PrivacyParams, PrivatizedObservation, privatize
from .config import ExperimentConfig
from .imageio import ImageFormatError, decode_png, encode_png
from .sweep import epsilon_for_mu, render_csv, run_sweep

__all__ = ["create_app", "jsonable", "safe_ssim", "serve", "DATA_DIR_ENV"]

DATA_DIR_ENV = "RECONLAB_DATA_DIR"
BUILTIN_DATASET_SIZE = 64

_BUILTIN_SPECS = {
    f"builtin:{family}": DatasetSpec(family=family, height=16, width=16, channels=1)
    for family in ("blobs_a", "blobs_b", "bars")
}
ISOTROPIC_PRIOR = "builtin:isotropic"


def jsonable(value: Any) -> Any:
    """Recursively replace non-finite floats with strings."""
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if np.isfinite(v):
            return v
        return "nan" if np.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(value, (np.integer,)):
        return int(value)
    return value


def safe_ssim(a: ImageTensor, b: ImageTensor) -> Optional[float]:
    """ssim, or None for images too small for the similarity window."""
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        return None
    return ssim(a, b)


def _b64_png(image: ImageTensor) -> tuple[str, bool]:
    data, lossy = encode_png(image)
    return base64.b64encode(data).decode("ascii"), lossy


class AttackRequest(BaseModel):
    image_b64: Optional[str] = None
    dataset: Optional[str] = None
    index: int = 0
    prior: str = ISOTROPIC_PRIOR
    clip_norm: float = 1.0
    mu: Optional[float] = None
    sigma: Optional[float] = None
    mode: Literal["single", "consensus"] = "single"
    k: int = 5
    lambda_known: bool = True
    seed: int = 0

    @model_validator(mode="after")
    def _check(self):
        if (self.image_b64 is None) == (self.dataset is None):
            raise ValueError("give exactly one of image_b64 or dataset")
        if (self.mu is None) == (self.sigma is None):
            raise ValueError("give exactly one of mu or sigma")
        if self.mu is not None and self.mu <= 0.0:
            raise ValueError("mu must be positive")
        if self.sigma is not None and self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")
        if self.clip_norm <= 0.0:
            raise ValueError("clip_norm must be positive")
        if self.mode == "consensus" and self.k < 2:
            raise ValueError("consensus mode needs k >= 2")
        return self


class AccountantRequest(BaseModel):
    mu: float
    T: int
    p: float
    delta: float


class ServiceState:
    """Caches and the job table; one lock guards every mutation."""

    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self.schedule = linear_schedule()
        self.lock = threading.Lock()
        self._datasets: dict[str, tuple[DatasetSpec, list[ImageTensor]]] = {}
        self._predictors: dict[str, Any] = {}
        self.jobs: dict[str, dict[str, Any]] = {}
        self._job_counter = 0

    # --- discovery ---------------------------------------------------------

    def _scan(self) -> dict[str, tuple[Path, str]]:
        found = {}
        if self.data_dir.is_dir():
            for path in sorted(self.data_dir.glob("*.rlab")):
                try:
                    kind, _, _ = load_container(path)
                except (ContainerFormatError, OSError):
                    continue
                found[path.stem] = (path, kind)
        return found

    def dataset_entries(self) -> list[dict[str, Any]]:
        entries = []
        for name, spec in _BUILTIN_SPECS.items():
            entries.append(
                {
                    "name": name,
                    "family": spec.family,
                    "height": spec.height,
                    "width": spec.width,
                    "channels": spec.channels,
                    "n": BUILTIN_DATASET_SIZE,
                    "builtin": True,
                }
            )
        for name, (path, kind) in self._scan().items():
            if kind != "dataset":
                continue
            spec, images = self._load_dataset_file(name, path)
            entries.append(
                {
                    "name": name,
                    "family": spec.family,
                    "height": spec.height,
                    "width": spec.width,
                    "channels": spec.channels,
                    "n": len(images),
                    "builtin": False,
                }
            )
        return entries

    def prior_entries(self) -> list[dict[str, Any]]:
        entries = [{"name": ISOTROPIC_PRIOR, "kind": "isotropic", "builtin": True}]
        for name, (path, kind) in self._scan().items():
            if kind == "gmm_prior":
                prior, _ = load_prior(path)
                entries.append(
                    {
                        "name": name,
                        "kind": "gmm",
                        "components": int(prior.weights.size),
                        "dimension": int(prior.means.shape[1]),
                        "builtin": False,
                    }
                )
            elif kind == "denoiser":
                net = load_denoiser(path)
                entries.append(
                    {
                        "name": name,
                        "kind": "denoiser",
                        "dimension": int(net.dimension),
                        "builtin": False,
                    }
                )
        return entries

    # --- resolution --------------------------------------------------------

    def _load_dataset_file(self, name: str, path: Path):
        with self.lock:
            if name not in self._datasets:
                self._datasets[name] = load_dataset(path)
            return self._datasets[name]

    def resolve_sample(self, name: str, index: int) -> ImageTensor:
        if name in _BUILTIN_SPECS:
            key = name
            with self.lock:
                if key not in self._datasets:
                    spec = _BUILTIN_SPECS[name]
                    self._datasets[key] = (
                        spec,
                        generate_dataset(spec, BUILTIN_DATASET_SIZE),
                    )
                _, images = self._datasets[key]
        else:
            found = self._scan()
            if name not in found or found[name][1] != "dataset":
                raise HTTPException(404, f"unknown dataset {name!r}")
            _, images = self._load_dataset_file(name, found[name][0])
        if not 0 <= index < len(images):
            raise HTTPException(400, f"index {index} outside dataset of {len(images)}")
        return images[index]

    def resolve_predictor(self, name: str, dimension: int):
        if name == ISOTROPIC_PRIOR:
            key = f"{name}:{dimension}"
            with self.lock:
                if key not in self._predictors:
                    prior = GmmPrior(
                        weights=np.array([1.0]),
                        means=np.full((1, dimension), 0.5),
                        variances=np.array([0.05]),
                    )
                    self._predictors[key] = gmm_predictor(prior, self.schedule)
                return self._predictors[key]
        found = self._scan()
        if name not in found or found[name][1] not in ("gmm_prior", "denoiser"):
            raise HTTPException(404, f"unknown prior {name!r}")
        path, kind = found[name]
        with self.lock:
            if name not in self._predictors:
                if kind == "gmm_prior":
                    prior, _ = load_prior(path)
                    self._predictors[name] = gmm_predictor(prior, self.schedule)
                else:
                    self._predictors[name] = load_denoiser(path)
            predictor = self._predictors[name]
        pred_dim = (
            int(predictor.prior.means.shape[1])
            if hasattr(predictor, "prior")
            else int(predictor.dimension)
        )
        if pred_dim != dimension:
            raise HTTPException(
                400, f"prior dimension {pred_dim} does not match image size {dimension}"
            )
        return predictor

    # --- jobs --------------------------------------------------------------

    def submit_job(self, cfg: ExperimentConfig) -> str:
        with self.lock:
            self._job_counter += 1
            job_id = f"job-{self._job_counter:04d}"
            self.jobs[job_id] = {"id": job_id, "status": "queued", "error": None}
        # each job writes under its own directory so concurrent sweeps never race
        cfg = dataclasses.replace(cfg, output_dir=str(self.data_dir / "reports" / job_id))
        thread = threading.Thread(target=self._run_job, args=(job_id, cfg), daemon=True)
        thread.start()
        return job_id

    def _run_job(self, job_id: str, cfg: ExperimentConfig) -> None:
        with self.lock:
            self.jobs[job_id]["status"] = "running"
        try:
            report = run_sweep(cfg)
            payload = {
                "rows": [
                    {
                        "label": row.label,
                        "mu": row.mu,
                        "clip_norm": row.clip_norm,
                        "sigma": row.sigma,
                        "epsilon": row.epsilon,
                        "status": row.status,
                        "error": row.error,
                        "stats": row.stats,
                    }
                    for row in report.rows
                ],
                "reference": report.reference,
                "manifest": report.manifest,
                "csv": render_csv(report, cfg.metrics),
            }
            with self.lock:
                self.jobs[job_id]["status"] = "done"
                self.jobs[job_id]["report"] = jsonable(payload)
        except Exception as exc:
            with self.lock:
                self.jobs[job_id]["status"] = "failed"
                self.jobs[job_id]["error"] = f"{type(exc).__name__}: {exc}"

    def job_view(self, job_id: str) -> dict[str, Any]:
        with self.lock:
            if job_id not in self.jobs:
                raise HTTPException(404, f"unknown job {job_id!r}")
            job = self.jobs[job_id]
            return {"id": job["id"], "status": job["status"], "error": job["error"]}

    def job_report(self, job_id: str) -> dict[str, Any]:
        with self.lock:
            if job_id not in self.jobs:
                raise HTTPException(404, f"unknown report {job_id!r}")
            job = self.jobs[job_id]
            if job["status"] != "done":
                raise HTTPException(409, f"job {job_id} is {job['status']}, not done")
            return job["report"]


def _decode_request_image(image_b64: str) -> ImageTensor:
    try:
        raw = base64.b64decode(image_b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise HTTPException(400, f"image_b64 is not valid base64: {exc}") from exc
    try:
        return decode_png(raw)
    except ImageFormatError as exc:
        raise HTTPException(400, str(exc)) from exc


def create_app(data_dir: str | Path | None = None) -> FastAPI:
    """App factory; data_dir defaults to $RECONLAB_DATA_DIR or ./data."""
    root = Path(data_dir or os.environ.get(DATA_DIR_ENV, "data"))
    state = ServiceState(root)
    app = FastAPI(title="reconlab audit service")
    app.state.lab = state

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/datasets")
    def datasets():
        return {"datasets": state.dataset_entries()}

    @app.get("/priors")
    def priors():
        return {"priors": state.prior_entries()}

    @app.post("/accountant")
    def accountant(req: AccountantRequest):
        try:
            cfg = AccountantConfig(steps=req.T, sampling_prob=req.p, delta=req.delta)
            result = mu_to_epsilon(req.mu, cfg)
        except (ValueError, AccountingOverflowError) as exc:
            raise HTTPException(400, str(exc)) from exc
        return jsonable(
            {
                "mu": req.mu,
                "epsilon": result.epsilon,
                "best_order": result.best_order,
                "delta": result.delta,
            }
        )

    @app.post("/attack")
    def attack(req: AttackRequest):
        if req.image_b64 is not None:
            original = _decode_request_image(req.image_b64)
        else:
            original = state.resolve_sample(req.dataset, req.index)
        if req.mu is not None:
            params = PrivacyParams.from_mu(req.mu, clip_norm=req.clip_norm)
        else:
            params = PrivacyParams(clip_norm=req.clip_norm, sigma=req.sigma)
        predictor = state.resolve_predictor(req.prior, original.size)
        obs = privatize(original, params, seed=req.seed)
        lambda_table = None
        try:
            attack_obs = obs
            if not req.lambda_known:
                search = approximate_lambda(obs.without_lambda(), state.schedule, predictor)
                lambda_table = {
                    "candidates": list(search.candidates),
                    "scores": list(search.scores),
                    "lambda_hat": search.lambda_hat,
                }
                if search.lambda_hat is None:
                    raise HTTPException(
                        400, "prior cannot score clip-factor candidates; use a mixture prior"
                    )
                # the adversary proceeds with its estimate in place of the true factor
                attack_obs = PrivatizedObservation(
                    x_priv=obs.x_priv, params=params, lam=search.lambda_hat
                )
            result = reconstruct(attack_obs, state.schedule, predictor, seed=req.seed)
            if req.mode == "consensus":
                consensus = consensus_reconstruct(
                    attack_obs, state.schedule, predictor, k=req.k, seed=req.seed
                )
                image = consensus.image
            else:
                consensus = None
                image = result.image
        except ScheduleOverflowError as exc:
            raise HTTPException(400, str(exc)) from exc
        noisy = obs.x_priv.with_data(obs.x_priv.data * result.lambda_used)
        original_b64, original_lossy = _b64_png(original)
        noisy_b64, noisy_lossy = _b64_png(noisy)
        recon_b64, recon_lossy = _b64_png(image)
        payload: dict[str, Any] = {
            "mu": params.clip_norm / params.sigma if params.sigma > 0 else float("inf"),
            "epsilon": epsilon_for_mu(
                params.clip_norm / params.sigma if params.sigma > 0 else float("inf")
            ),
            "clip_norm": params.clip_norm,
            "sigma": params.sigma,
            "lambda_used": result.lambda_used,
            "t_start": result.t_start,
            "mode": req.mode,
            "seed": req.seed,
            "original_b64": original_b64,
            "noisy_b64": noisy_b64,
            "reconstruction_b64": recon_b64,
            "metrics": {"mse": mse(image, original), "ssim": safe_ssim(image, original)},
            "noisy_metrics": {
                "mse": mse(noisy, original),
                "ssim": safe_ssim(noisy, original),
            },
            "lossy": {
                "original": original_lossy,
                "noisy": noisy_lossy,
                "reconstruction": recon_lossy,
            },
            "lambda_table": lambda_table,
        }
        if consensus is not None:
            payload["consensus_b64"] = [_b64_png(s)[0] for s in consensus.samples]
            payload["consensus_consistency"] = {
                "metric": consensus.mean_pairwise.metric.value,
                "value": consensus.mean_pairwise.value,
            }
        return jsonable(payload)

    @app.post("/sweep")
    def sweep(body: dict):
        try:
            cfg = ExperimentConfig.from_dict(body)
        except (TypeError, ValueError) as exc:
            raise HTTPException(400, f"bad sweep config: {exc}") from exc
        job_id = state.submit_job(cfg)
        return {"job_id": job_id}

    @app.get("/jobs/{job_id}")
    def job(job_id: str):
        return state.job_view(job_id)

    @app.get("/report/{job_id}")
    def report(job_id: str):
        return state.job_report(job_id)

    return app


def serve(address: str = "127.0.0.1:8000", data_dir: str | Path | None = None) -> None:
    """Blocking; hosts create_app(data_dir) on host:port."""
    import uvicorn

    host, _, port = address.rpartition(":")
    uvicorn.run(create_app(data_dir), host=host or "127.0.0.1", port=int(port))
