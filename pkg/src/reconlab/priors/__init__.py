"""Data priors: exact GMM scorers, trained toy denoisers, synthetic datasets."""

from .datasets import FAMILIES, DatasetSpec, dataset_mean_image, generate_dataset
from .denoiser import (
    TEMB_WIDTH,
    ToyDenoiser,
    TrainConfig,
    TrainingDivergedError,
    time_embedding,
    train_toy_denoiser,
)
from .gmm import (
    VARIANCE_FLOOR,
    GmmPrior,
    GmmScorePredictor,
    fit_gmm,
    fit_gmm_from_dataset,
    gmm_predictor,
    gmm_sample,
)
from .serialize import (
    ContainerFormatError,
    load_container,
    load_dataset,
    load_denoiser,
    load_prior,
    save_container,
    save_dataset,
    save_denoiser,
    save_prior,
)

__all__ = [
    "FAMILIES",
    "DatasetSpec",
    "dataset_mean_image",
    "generate_dataset",
    "TEMB_WIDTH",
    "ToyDenoiser",
    "TrainConfig",
    "TrainingDivergedError",
    "time_embedding",
    "train_toy_denoiser",
    "VARIANCE_FLOOR",
    "GmmPrior",
    "GmmScorePredictor",
    "fit_gmm",
    "fit_gmm_from_dataset",
    "gmm_predictor",
    "gmm_sample",
    "ContainerFormatError",
    "load_container",
    "load_dataset",
    "load_denoiser",
    "load_prior",
    "save_container",
    "save_dataset",
    "save_denoiser",
    "save_prior",
]
