"""Shared fixtures: one default schedule and a small blob-family prior.

The expensive fixtures are session-scoped; individual tests never mutate
them (tensors and priors are frozen), so sharing is safe.
"""

import numpy as np
import pytest

from reconlab.diffusion import linear_schedule
from reconlab.priors import DatasetSpec, fit_gmm, generate_dataset, gmm_predictor


@pytest.fixture(scope="session")
def schedule():
    return linear_schedule()


@pytest.fixture(scope="session")
def blob_spec():
    return DatasetSpec(family="blobs_a", height=8, width=8, channels=1)


@pytest.fixture(scope="session")
def blob_images(blob_spec):
    return generate_dataset(blob_spec, 256, seed=101)


@pytest.fixture(scope="session")
def blob_prior(blob_images):
    data = np.stack([im.data for im in blob_images])
    return fit_gmm(data, k=8, seed=202)


@pytest.fixture(scope="session")
def blob_predictor(blob_prior, schedule):
    return gmm_predictor(blob_prior, schedule)
