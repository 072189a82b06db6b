"""Priors: exact GMM scorer against a quadrature oracle, sampling moments,
EM fits, the synthetic image families, the toy denoiser, and container
round-trips.

The score oracle never touches the closed-form Gaussian convolution the
implementation is built on: the step-t marginal is integrated numerically
with tensorized Gauss-Hermite quadrature and differentiated by central
differences. Constants frozen below were produced by that oracle; the
oracle itself is re-run so drift in either side fails loudly.
"""

from unittest import mock

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from reconlab.core import ImageTensor, make_rng
from reconlab.diffusion import forward_diffuse, linear_schedule
from reconlab.priors import (
    FAMILIES,
    TEMB_WIDTH,
    VARIANCE_FLOOR,
    ContainerFormatError,
    DatasetSpec,
    GmmPrior,
    ToyDenoiser,
    TrainConfig,
    TrainingDivergedError,
    dataset_mean_image,
    fit_gmm,
    fit_gmm_from_dataset,
    generate_dataset,
    gmm_predictor,
    gmm_sample,
    time_embedding,
    load_container,
    load_dataset,
    load_denoiser,
    load_prior,
    save_container,
    save_dataset,
    save_denoiser,
    save_prior,
    train_toy_denoiser,
)

# ---------------------------------------------------------------------------
# oracles


def quadrature_log_marginal(x, t, prior, schedule, nodes=60):
    """log p_t(x) by brute-force integration of the forward-noising integral.

    Per component: substitute x0 = m + sqrt(2) s u so the prior factor
    becomes the Gauss-Hermite weight, then evaluate the noising likelihood
    on the tensorized node grid. Sixty nodes per axis put the quadrature
    error at machine precision for these variances.
    """
    ab = schedule.alpha_bar(t)
    a = np.sqrt(ab)
    noise_var = 1.0 - ab
    d = x.size
    u, wq = np.polynomial.hermite.hermgauss(nodes)
    grids = np.meshgrid(*([u] * d), indexing="ij")
    uu = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([wq] * d), indexing="ij")
    ww = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    total = 0.0
    for wi, mi, vi in zip(prior.weights, prior.means, prior.variances):
        x0 = mi[None, :] + np.sqrt(2.0 * vi) * uu
        diff = x[None, :] - a * x0
        like = np.exp(-0.5 * np.sum(diff * diff, axis=1) / noise_var)
        like /= (2.0 * np.pi * noise_var) ** (d / 2.0)
        total += wi * np.sum(ww * like) / np.pi ** (d / 2.0)
    return np.log(total)


def central_difference_score(log_density, x, h=1e-5):
    grad = np.zeros_like(x)
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        grad[j] = (log_density(xp) - log_density(xm)) / (2.0 * h)
    return grad


def direct_log_density(x, t, prior, schedule):
    """Independent closed-form marginal via scipy's multivariate normal."""
    ab = schedule.alpha_bar(t)
    total = 0.0
    for w, m, s2 in zip(prior.weights, prior.means, prior.variances):
        cov = (ab * s2 + (1.0 - ab)) * np.eye(x.size)
        total += w * multivariate_normal.pdf(x, mean=np.sqrt(ab) * m, cov=cov)
    return np.log(total)


def _vector_image(x):
    x = np.asarray(x, dtype=np.float64)
    return ImageTensor(height=1, width=x.size, channels=1, data=x)


@pytest.fixture(scope="module")
def three_component_prior():
    return GmmPrior(
        weights=np.array([0.5, 0.3, 0.2]),
        means=np.array([[0.2, 0.7], [0.6, 0.3], [0.8, 0.9]]),
        variances=np.array([0.04, 0.09, 0.01]),
    )


# frozen from the quadrature oracle above (60 nodes, h = 1e-5) on the
# default schedule and the three-component prior
FROZEN_MARGINALS = [
    # (t, x, log p_t(x), central-difference score)
    (400, (0.45, 0.55), -1.7316339646930421, (-0.31034789429451592, -0.33389412050777167)),
    (120, (-0.3, 1.1), -1.9418909064856986, (2.9414891202672595, -2.5967256670256234)),
]


class TestGmmScorePredictor:
    def test_single_standard_component_recovers_hand_formula(self, schedule):
        # m = 0, s^2 = 1 keeps the marginal standard at every t, so
        # eps_hat(x, t) = sqrt(1 - ab_t) x exactly
        prior = GmmPrior(
            weights=np.array([1.0]), means=np.zeros((1, 3)), variances=np.array([1.0])
        )
        pred = gmm_predictor(prior, schedule)
        x = _vector_image([0.4, -1.2, 2.5])
        for t in (1, 137, 500, 1000):
            expected = np.sqrt(1.0 - schedule.alpha_bar(t)) * x.data
            np.testing.assert_allclose(pred.predict_noise(x, t).data, expected, rtol=1e-12)

    def test_score_vanishes_at_dominant_component_mean(self, schedule):
        prior = GmmPrior(
            weights=np.array([0.5, 0.5]),
            means=np.array([[0.0, 0.0], [8.0, 8.0]]),
            variances=np.array([0.04, 0.04]),
        )
        pred = gmm_predictor(prior, schedule)
        t = 100
        at_mean = _vector_image(np.sqrt(schedule.alpha_bar(t)) * prior.means[0])
        assert np.linalg.norm(pred.score(at_mean, t).data) < 1e-8

    def test_log_density_matches_frozen_quadrature(self, three_component_prior, schedule):
        pred = gmm_predictor(three_component_prior, schedule)
        for t, x, frozen_logp, _ in FROZEN_MARGINALS:
            x = np.array(x)
            oracle = quadrature_log_marginal(x, t, three_component_prior, schedule)
            assert oracle == pytest.approx(frozen_logp, abs=1e-12)
            assert pred.log_density(_vector_image(x), t) == pytest.approx(frozen_logp, abs=1e-9)

    def test_score_matches_frozen_finite_differences(self, three_component_prior, schedule):
        pred = gmm_predictor(three_component_prior, schedule)
        for t, x, _, frozen_score in FROZEN_MARGINALS:
            x = np.array(x)
            oracle = central_difference_score(
                lambda p: quadrature_log_marginal(p, t, three_component_prior, schedule), x
            )
            np.testing.assert_allclose(oracle, frozen_score, atol=1e-9)
            np.testing.assert_allclose(pred.score(_vector_image(x), t).data, frozen_score, atol=1e-6)

    def test_randomized_score_matches_finite_differences(self, schedule):
        rng = make_rng(42)
        for _ in range(25):
            d = int(rng.integers(1, 5))
            k = int(rng.integers(1, 4))
            prior = GmmPrior(
                weights=rng.dirichlet(np.ones(k)),
                means=rng.uniform(-1.0, 1.0, size=(k, d)),
                variances=rng.uniform(0.05, 0.5, size=k),
            )
            pred = gmm_predictor(prior, schedule)
            t = int(rng.integers(1, schedule.num_steps + 1))
            x = prior.means[int(rng.integers(k))] + rng.normal(0.0, 0.5, size=d)
            fd = central_difference_score(lambda p: direct_log_density(p, t, prior, schedule), x)
            np.testing.assert_allclose(pred.score(_vector_image(x), t).data, fd, atol=1e-5)

    def test_predict_noise_is_scaled_negative_score(self, three_component_prior, schedule):
        pred = gmm_predictor(three_component_prior, schedule)
        x = _vector_image([0.1, 0.9])
        for t in (1, 400, 1000):
            expected = -np.sqrt(1.0 - schedule.alpha_bar(t)) * pred.score(x, t).data
            np.testing.assert_allclose(pred.predict_noise(x, t).data, expected, rtol=1e-14)

    def test_dimension_mismatch_rejected(self, three_component_prior, schedule):
        pred = gmm_predictor(three_component_prior, schedule)
        with pytest.raises(ValueError, match="dimension"):
            pred.predict_noise(_vector_image([0.1, 0.2, 0.3]), 10)

    def test_step_out_of_range_rejected(self, three_component_prior, schedule):
        pred = gmm_predictor(three_component_prior, schedule)
        with pytest.raises(ValueError):
            pred.predict_noise(_vector_image([0.1, 0.2]), 0)
        with pytest.raises(ValueError):
            pred.log_density(_vector_image([0.1, 0.2]), schedule.num_steps + 1)


class TestGmmSample:
    def test_zero_variance_component_collapses_to_mean(self):
        mean = np.array([[0.3, 0.6, 0.9, 0.1]])
        prior = GmmPrior(weights=np.array([1.0]), means=mean, variances=np.array([0.0]))
        for im in gmm_sample(prior, 10, seed=3):
            np.testing.assert_array_equal(im.data, mean[0])

    def test_empirical_mean_within_three_sigma(self, three_component_prior):
        n = 10_000
        draws = gmm_sample(three_component_prior, n, seed=17)
        stack = np.stack([im.data for im in draws])
        p = three_component_prior
        mix_mean = p.weights @ p.means
        # per-coordinate draw variance: E[s^2] + E[m^2] - (E[m])^2
        coord_var = (
            p.weights @ (p.variances[:, None] + p.means**2) - mix_mean**2
        )
        band = 3.0 * np.sqrt(coord_var / n)
        assert np.all(np.abs(stack.mean(axis=0) - mix_mean) < band)

    def test_seeded_repeat_is_identical(self, three_component_prior):
        a = gmm_sample(three_component_prior, 16, seed=99)
        b = gmm_sample(three_component_prior, 16, seed=99)
        for ia, ib in zip(a, b):
            np.testing.assert_array_equal(ia.data, ib.data)

    def test_default_shape_is_flat_row(self, three_component_prior):
        im = gmm_sample(three_component_prior, 1, seed=0)[0]
        assert im.shape == (1, 2, 1)

    def test_explicit_shape_and_validation(self):
        prior = GmmPrior(
            weights=np.array([1.0]), means=np.zeros((1, 12)), variances=np.array([1.0])
        )
        assert gmm_sample(prior, 1, seed=0, shape=(2, 2, 3))[0].shape == (2, 2, 3)
        with pytest.raises(ValueError, match="incompatible"):
            gmm_sample(prior, 1, seed=0, shape=(2, 2, 1))
        with pytest.raises(ValueError, match="n >= 1"):
            gmm_sample(prior, 0, seed=0)


def data_log_likelihood(data, prior):
    """Plain-loop total log-likelihood used to audit the EM fit."""
    total = 0.0
    for row in data:
        dens = 0.0
        for w, m, s2 in zip(prior.weights, prior.means, prior.variances):
            dens += w * multivariate_normal.pdf(row, mean=m, cov=s2 * np.eye(row.size))
        total += np.log(dens)
    return total


class TestFitGmm:
    def test_repeated_image_single_component(self):
        image = np.array([0.2, 0.5, 0.8, 0.3])
        data = np.tile(image, (50, 1))
        prior = fit_gmm(data, k=1, seed=0)
        np.testing.assert_allclose(prior.means[0], image, atol=1e-12)
        assert prior.variances[0] == VARIANCE_FLOOR
        assert prior.weights[0] == 1.0

    def test_two_separated_clusters_recovered(self):
        rng = make_rng(8)
        spread = 0.3
        a = rng.normal(0.0, spread, size=(200, 3))
        b = rng.normal(5.0, spread, size=(200, 3))
        prior = fit_gmm(np.vstack([a, b]), k=2, seed=1)
        centers = prior.means[np.argsort(prior.means[:, 0])]
        assert np.linalg.norm(centers[0] - 0.0) < 3.0 * spread
        assert np.linalg.norm(centers[1] - 5.0) < 3.0 * spread
        np.testing.assert_allclose(prior.weights, 0.5, atol=0.05)
        np.testing.assert_allclose(prior.variances, spread**2, rtol=0.35)

    def test_log_likelihood_never_decreases(self, blob_images):
        data = np.stack([im.data for im in blob_images[:64]])
        lls = [
            data_log_likelihood(data, fit_gmm(data, k=3, seed=5, max_iter=i))
            for i in range(1, 9)
        ]
        assert all(later >= earlier - 1e-9 for earlier, later in zip(lls, lls[1:]))

    def test_k_bounds_enforced(self):
        data = np.zeros((4, 2))
        with pytest.raises(ValueError, match="components"):
            fit_gmm(data, k=0, seed=0)
        with pytest.raises(ValueError, match="components"):
            fit_gmm(data, k=5, seed=0)

    def test_fit_from_dataset_is_deterministic(self, blob_spec, schedule):
        first = fit_gmm_from_dataset(blob_spec, k=4, seed=7)
        second = fit_gmm_from_dataset(blob_spec, k=4, seed=7)
        np.testing.assert_array_equal(first.means, second.means)
        np.testing.assert_array_equal(first.weights, second.weights)
        assert first.dimension == 64
        # fitted prior plugs straight into the predictor
        pred = gmm_predictor(first, schedule)
        sample = generate_dataset(blob_spec, 1)[0]
        assert np.all(np.isfinite(pred.predict_noise(sample, 300).data))


class TestDatasets:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_seeded_repeat_identical(self, family):
        spec = DatasetSpec(family=family, height=8, width=8, channels=1, seed=33)
        a = generate_dataset(spec, 12)
        b = generate_dataset(spec, 12)
        for ia, ib in zip(a, b):
            np.testing.assert_array_equal(ia.data, ib.data)

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("channels", [1, 3])
    def test_pixels_clean(self, family, channels):
        spec = DatasetSpec(family=family, height=6, width=6, channels=channels, seed=2)
        for im in generate_dataset(spec, 20):
            assert im.clean
            assert im.data.min() >= 0.0 and im.data.max() <= 1.0

    def test_seed_override_changes_draws(self):
        spec = DatasetSpec(family="blobs_a", seed=1)
        base = generate_dataset(spec, 4)
        other = generate_dataset(spec, 4, seed=2)
        assert any(
            not np.array_equal(ia.data, ib.data) for ia, ib in zip(base, other)
        )

    def test_mean_image_shift_ordering(self):
        geometry = dict(height=8, width=8, channels=1, seed=0)
        mean_a = dataset_mean_image(DatasetSpec(family="blobs_a", **geometry), n=256)
        mean_b = dataset_mean_image(DatasetSpec(family="blobs_b", **geometry), n=256)
        mean_bars = dataset_mean_image(DatasetSpec(family="bars", **geometry), n=256)
        near = np.linalg.norm(mean_a - mean_b)
        far = np.linalg.norm(mean_a - mean_bars)
        assert 0.0 < near < far

    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError, match="family"):
            DatasetSpec(family="checkers")


@pytest.fixture(scope="module")
def planted_gmm(schedule):
    """A known two-component prior plus a denoiser trained on its draws."""
    prior = GmmPrior(
        weights=np.array([0.5, 0.5]),
        means=np.array([[0.2, 0.8, 0.4, 0.6], [0.7, 0.3, 0.9, 0.1]]),
        variances=np.array([0.01, 0.01]),
    )
    train = gmm_sample(prior, 256, seed=11, shape=(2, 2, 1))
    config = TrainConfig(steps=2000, step_size=2e-3, batch_size=64, hidden=(64, 64), seed=5)
    net, losses = train_toy_denoiser(train, schedule, config)
    return prior, net, losses


class TestToyDenoiser:
    def test_loss_decreases(self, planted_gmm):
        _, _, losses = planted_gmm
        assert np.mean(losses[-50:]) < np.mean(losses[:50])

    def test_agrees_with_exact_predictor_on_held_out_latents(self, planted_gmm, schedule):
        prior, net, _ = planted_gmm
        exact = gmm_predictor(prior, schedule)
        held = gmm_sample(prior, 64, seed=12, shape=(2, 2, 1))
        t = schedule.num_steps // 2
        errors = []
        for i, x0 in enumerate(held):
            xt = forward_diffuse(x0, t, schedule, seed=1000 + i)
            diff = net.predict_noise(xt, t).data - exact.predict_noise(xt, t).data
            errors.append(np.sqrt(np.mean(diff**2)))
        assert np.mean(errors) <= 0.15

    def test_training_is_deterministic(self, schedule):
        images = gmm_sample(
            GmmPrior(
                weights=np.array([1.0]), means=np.zeros((1, 4)), variances=np.array([0.25])
            ),
            32,
            seed=4,
        )
        config = TrainConfig(steps=40, batch_size=8, hidden=(16, 16), seed=21)
        net_a, losses_a = train_toy_denoiser(images, schedule, config)
        net_b, losses_b = train_toy_denoiser(images, schedule, config)
        assert losses_a == losses_b
        for key in net_a.params:
            np.testing.assert_array_equal(net_a.params[key], net_b.params[key])
        x = images[0]
        np.testing.assert_array_equal(
            net_a.predict_noise(x, 100).data, net_a.predict_noise(x, 100).data
        )

    def test_trains_from_dataset_spec(self, schedule):
        spec = DatasetSpec(family="blobs_a", height=4, width=4, channels=1, seed=9)
        config = TrainConfig(steps=30, batch_size=8, hidden=(16, 16), seed=0, n_train=32)
        net, losses = train_toy_denoiser(spec, schedule, config)
        assert net.dimension == 16
        assert net.shape == (4, 4, 1)
        assert net.config == config
        assert len(losses) == 30

    def test_empty_training_set_rejected(self, schedule):
        with pytest.raises(ValueError, match="empty"):
            train_toy_denoiser([], schedule)

    def test_non_finite_loss_raises(self, schedule):
        images = gmm_sample(
            GmmPrior(
                weights=np.array([1.0]), means=np.zeros((1, 4)), variances=np.array([1.0])
            ),
            8,
            seed=0,
        )

        def poisoned(self, xb, tb, keep=False):
            out = np.full_like(xb[:, : self.dimension], np.nan)
            return (out, (xb, out, out)) if keep else out

        with mock.patch.object(ToyDenoiser, "_forward", poisoned):
            with pytest.raises(TrainingDivergedError, match="step 1"):
                train_toy_denoiser(images, schedule, TrainConfig(steps=5, batch_size=4))

    def test_predict_noise_validates_inputs(self, planted_gmm, schedule):
        _, net, _ = planted_gmm
        with pytest.raises(ValueError, match="dimension"):
            net.predict_noise(_vector_image([0.5]), 10)
        with pytest.raises(ValueError):
            net.predict_noise(_vector_image([0.1, 0.2, 0.3, 0.4]), 0)

    def test_time_embedding_layout(self):
        emb = time_embedding(7)
        assert emb.shape == (TEMB_WIDTH,)
        assert np.all(np.abs(emb) <= 1.0)
        # first frequency is 1, so the leading pair is (sin t, cos t)
        assert emb[0] == pytest.approx(np.sin(7.0))
        assert emb[TEMB_WIDTH // 2] == pytest.approx(np.cos(7.0))
        assert not np.array_equal(time_embedding(7), time_embedding(8))


class TestSerialization:
    def test_dataset_round_trip(self, tmp_path):
        spec = DatasetSpec(family="bars", height=6, width=6, channels=1, seed=44)
        images = generate_dataset(spec, 10)
        path = tmp_path / "bars.rlab"
        save_dataset(path, spec, images)
        loaded_spec, loaded = load_dataset(path)
        assert loaded_spec == spec
        assert len(loaded) == 10
        for orig, back in zip(images, loaded):
            assert back.clean
            np.testing.assert_allclose(back.data, orig.data, atol=1e-6)

    def test_prior_round_trip(self, tmp_path, three_component_prior, schedule):
        path = tmp_path / "prior.rlab"
        save_prior(path, three_component_prior, meta={"k": 3})
        loaded, meta = load_prior(path)
        assert meta["k"] == 3
        assert loaded.weights.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(loaded.means, three_component_prior.means, atol=1e-6)
        # predictors built from both sides agree to storage precision
        x = _vector_image([0.4, 0.6])
        before = gmm_predictor(three_component_prior, schedule).predict_noise(x, 300)
        after = gmm_predictor(loaded, schedule).predict_noise(x, 300)
        np.testing.assert_allclose(after.data, before.data, atol=1e-5)

    def test_denoiser_round_trip(self, tmp_path, planted_gmm, schedule):
        _, net, _ = planted_gmm
        path = tmp_path / "net.rlab"
        save_denoiser(path, net)
        loaded = load_denoiser(path)
        assert loaded.dimension == net.dimension
        assert loaded.shape == net.shape
        assert loaded.schedule.num_steps == schedule.num_steps
        for key in net.params:
            np.testing.assert_allclose(loaded.params[key], net.params[key], atol=1e-5)
        x = _vector_image([0.3, 0.1, 0.6, 0.2])
        np.testing.assert_allclose(
            loaded.predict_noise(x, 500).data,
            net.predict_noise(x, 500).data,
            atol=1e-4,
        )

    def test_container_round_trip_preserves_kind_and_meta(self, tmp_path):
        path = tmp_path / "box.rlab"
        arrays = {"a": np.arange(6.0).reshape(2, 3), "b": np.array([1.5])}
        save_container(path, "scratch", arrays, meta={"note": "x"})
        kind, loaded, meta = load_container(path)
        assert kind == "scratch"
        assert meta == {"note": "x"}
        np.testing.assert_allclose(loaded["a"], arrays["a"], atol=1e-6)
        assert loaded["a"].dtype == np.float64

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.rlab"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ContainerFormatError, match="magic"):
            load_container(path)

    def test_truncated_payload_rejected(self, tmp_path, three_component_prior):
        path = tmp_path / "prior.rlab"
        save_prior(path, three_component_prior)
        clipped = path.read_bytes()[:-5]
        path.write_bytes(clipped)
        with pytest.raises(ContainerFormatError, match="truncated"):
            load_prior(path)

    def test_kind_mismatch_rejected(self, tmp_path, three_component_prior):
        path = tmp_path / "prior.rlab"
        save_prior(path, three_component_prior)
        with pytest.raises(ContainerFormatError, match="dataset"):
            load_dataset(path)

    def test_unsupported_version_rejected(self, tmp_path):
        path = tmp_path / "future.rlab"
        save_container(path, "scratch", {"a": np.zeros(1)})
        raw = bytearray(path.read_bytes())
        raw[4:6] = (99).to_bytes(2, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(ContainerFormatError, match="version"):
            load_container(path)
