import numpy as np
import pytest

from gafi import (
    ConfigError,
    Dataset,
    NoiseSource,
    TrainingBudget,
    fit_classifier,
    fit_gmm_generator,
    gmm_sample,
    make_blobs,
    sample_latent,
)
from gafi.errors import TrainingError
from gafi.models.classifiers import MlpClassifier, SoftmaxClassifier, lr_at
from gafi.models.gmm import gmm_log_likelihood


class TestSampleLatent:
    def test_zero_stddev_all_zero(self):
        z = sample_latent(NoiseSource(dim=3, stddev=0.0), 10, seed=0)
        assert z.shape == (10, 3)
        assert np.all(z == 0.0)

    def test_count_zero_empty(self):
        z = sample_latent(NoiseSource(dim=2), 0, seed=0)
        assert z.shape == (0, 2)

    @pytest.mark.parametrize("stddev,lo,hi", [(1.0, 0.99, 1.01), (2.0, 1.98, 2.02)])
    def test_empirical_moments(self, stddev, lo, hi):
        z = sample_latent(NoiseSource(dim=1, stddev=stddev), 100_000, seed=42)
        # oracle: direct moment computation
        assert lo <= z.std() <= hi
        assert abs(z.mean()) <= 0.01 * stddev

    def test_negative_stddev_rejected(self):
        with pytest.raises(ConfigError):
            NoiseSource(dim=2, stddev=-0.1)


def independent_log_likelihood(X, weights, means, covs):
    """Per-class GMM log-likelihood computed from the density formula,
    independent of the module's own implementation."""
    total = np.zeros(X.shape[0])
    parts = []
    for w, mu, cov in zip(weights, means, covs):
        d = X.shape[1]
        diff = X - mu
        inv = np.linalg.inv(cov)
        quad = np.einsum("ni,ij,nj->n", diff, inv, diff)
        logdet = np.linalg.slogdet(cov)[1]
        parts.append(np.log(w) - 0.5 * (d * np.log(2 * np.pi) + logdet + quad))
    stacked = np.stack(parts, axis=1)
    m = stacked.max(axis=1, keepdims=True)
    return float((m.ravel() + np.log(np.exp(stacked - m).sum(axis=1))).sum())


class TestGmm:
    def test_single_component_moment_match(self, small_split):
        train, _ = small_split
        cps = fit_gmm_generator(train, components_per_class=1, em_iterations=3, seed=0)
        final = cps[-1]
        for c in range(train.num_classes):
            Xc = train.features[train.labels == c]
            assert np.allclose(final.params["means"][c][0], Xc.mean(axis=0), atol=1e-9)
            expected_cov = np.cov(Xc.T, bias=True) + 1e-6 * np.eye(2)
            assert np.allclose(final.params["covs"][c][0], expected_cov, atol=1e-9)

    def test_checkpoint_count_and_epochs(self, small_split):
        train, _ = small_split
        cps = fit_gmm_generator(train, 1, em_iterations=5, seed=1)
        assert len(cps) == 6
        assert [cp.epoch for cp in cps] == list(range(6))

    def test_log_likelihood_non_decreasing(self):
        rng = np.random.default_rng(0)
        for trial in range(5):
            X = np.vstack([rng.standard_normal((60, 2)) + [3, 0],
                           rng.standard_normal((60, 2)) * 0.5])
            ds = Dataset(X, np.zeros(120, dtype=int), 1)
            cps = fit_gmm_generator(ds, components_per_class=2, em_iterations=25,
                                    seed=trial)
            lls = [independent_log_likelihood(
                X, cp.params["weights"][0], cp.params["means"][0], cp.params["covs"][0])
                for cp in cps]
            diffs = np.diff(lls)
            assert np.all(diffs >= -1e-9), f"trial {trial}: {diffs.min()}"

    def test_module_ll_matches_independent(self, small_split, small_checkpoints):
        train, _ = small_split
        module_ll = gmm_log_likelihood(small_checkpoints[-1], train)
        for c in range(train.num_classes):
            Xc = train.features[train.labels == c]
            cp = small_checkpoints[-1]
            ref = independent_log_likelihood(
                Xc, cp.params["weights"][c], cp.params["means"][c], cp.params["covs"][c])
            assert np.isclose(module_ll[c], ref, rtol=1e-9)

    def test_same_seed_identical_checkpoints(self, small_split):
        train, _ = small_split
        a = fit_gmm_generator(train, 2, 4, seed=9)
        b = fit_gmm_generator(train, 2, 4, seed=9)
        for cp_a, cp_b in zip(a, b):
            for key in cp_a.params:
                assert np.array_equal(cp_a.params[key], cp_b.params[key])

    def test_empty_class_rejected(self):
        ds = Dataset([[0.0], [1.0]], [0, 0], num_classes=2)
        with pytest.raises(TrainingError, match="class 1"):
            fit_gmm_generator(ds, 1, 2, seed=0)


class TestGmmSample:
    def test_zero_stddev_collapses_to_means(self, small_checkpoints):
        cp = small_checkpoints[-1]
        samples = gmm_sample(cp, 0, 50, stddev=0.0, seed=1)
        assert np.allclose(samples, cp.params["means"][0][0], atol=1e-12)

    @pytest.mark.parametrize("stddev", [1.0, 2.0])
    def test_covariance_scales_with_stddev(self, small_checkpoints, stddev):
        cp = small_checkpoints[-1]
        samples = gmm_sample(cp, 1, 50_000, stddev=stddev, seed=3)
        # oracle: direct covariance estimate vs stddev^2 * checkpoint covariance
        expected = stddev ** 2 * cp.params["covs"][1][0]
        observed = np.cov(samples.T, bias=True)
        rel = np.linalg.norm(observed - expected) / np.linalg.norm(expected)
        assert rel < 0.05

    def test_class_out_of_range(self, small_checkpoints):
        with pytest.raises(ValueError):
            gmm_sample(small_checkpoints[-1], 5, 1, 1.0, seed=0)

    def test_deterministic(self, small_checkpoints):
        cp = small_checkpoints[-1]
        a = gmm_sample(cp, 0, 100, 1.3, seed=77)
        b = gmm_sample(cp, 0, 100, 1.3, seed=77)
        assert np.array_equal(a, b)


class TestTrainingBudget:
    def test_decay_epochs_must_increase(self):
        with pytest.raises(ConfigError):
            TrainingBudget(epochs=10, decay_epochs=(5, 5))

    def test_decay_epochs_below_epochs(self):
        with pytest.raises(ConfigError):
            TrainingBudget(epochs=10, decay_epochs=(12,))

    def test_lr_schedule(self):
        b = TrainingBudget(epochs=10, learning_rate=1.0, decay_epochs=(4, 8),
                           decay_factor=0.1)
        assert lr_at(b, 0) == 1.0
        assert lr_at(b, 3) == 1.0
        assert np.isclose(lr_at(b, 4), 0.1)
        assert np.isclose(lr_at(b, 9), 0.01)


class TestClassifiers:
    def test_separable_data_softmax(self):
        # oracle: a perceptron run proves linear separability first
        ds = make_blobs(2, 100, [(-3.0, 0.0), (3.0, 0.0)], [0.5, 0.5], seed=4)
        w = np.zeros(3)
        X1 = np.column_stack([ds.features, np.ones(len(ds))])
        y_signed = np.where(ds.labels == 1, 1.0, -1.0)
        for _ in range(200):
            miss = (X1 @ w) * y_signed <= 0
            if not miss.any():
                break
            w += (y_signed[miss, None] * X1[miss]).sum(axis=0)
        assert not miss.any(), "perceptron oracle says data is not separable"

        budget = TrainingBudget(epochs=30, batch_size=32, learning_rate=0.5,
                                momentum=0.9)
        clf = fit_classifier("softmax", ds, budget, seed=0)
        train_acc = np.mean(clf.predict(ds.features) == ds.labels)
        assert train_acc >= 0.99

    def test_predict_proba_rows_sum_to_one(self, small_split, small_oracle):
        _, test = small_split
        proba = small_oracle.predict_proba(test.features)
        assert np.all(proba >= 0)
        assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)

    def test_predict_is_argmax_lowest_tie(self):
        class Stub(SoftmaxClassifier):
            def predict_proba(self, X):
                return np.array([[0.4, 0.4, 0.2]])

        assert Stub().predict(np.zeros((1, 2)))[0] == 0

    def test_classifier_gradients_match_finite_differences(self):
        from gafi.models import autodiff as ad
        rng = np.random.default_rng(5)
        step, tol = 1e-5, 1e-5
        for trial in range(20):
            clf = MlpClassifier(budget=TrainingBudget(epochs=1), num_classes=3,
                                seed=trial, hidden_width=4)
            clf.start_run(3, 2)
            X = rng.standard_normal((6, 2))
            y = rng.integers(0, 3, 6)
            loss = ad.cross_entropy_logits(clf._logits(X), y)
            loss.backward()
            for p in clf.params_:
                analytic = p.grad.copy()
                numeric = np.zeros_like(p.data)
                it = np.nditer(p.data, flags=["multi_index"])
                while not it.finished:
                    idx = it.multi_index
                    orig = p.data[idx]
                    p.data[idx] = orig + step
                    hi = float(ad.cross_entropy_logits(clf._logits(X), y).data)
                    p.data[idx] = orig - step
                    lo = float(ad.cross_entropy_logits(clf._logits(X), y).data)
                    p.data[idx] = orig
                    numeric[idx] = (hi - lo) / (2 * step)
                    it.iternext()
                denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
                assert np.max(np.abs(analytic - numeric) / denom) < tol

    def test_duplicated_dataset_trains_identically(self):
        ds = make_blobs(2, 40, [(-2.0, 0.0), (2.0, 0.0)], [1.0, 1.0], seed=6)
        dup_features = np.vstack([ds.features, ds.features])
        dup_labels = np.concatenate([ds.labels, ds.labels])

        budget = TrainingBudget(epochs=5, batch_size=16, learning_rate=0.1,
                                momentum=0.9, weight_decay=1e-4)
        dup_budget = TrainingBudget(epochs=5, batch_size=32, learning_rate=0.1,
                                    momentum=0.9, weight_decay=1e-4)
        a = MlpClassifier(budget=budget, num_classes=2, seed=3, hidden_width=8)
        a.fit(ds.features, ds.labels)
        b = MlpClassifier(budget=dup_budget, num_classes=2, seed=3, hidden_width=8)
        b.fit(dup_features, dup_labels)
        # content-keyed shuffling pairs the duplicates, so averaged batch
        # gradients coincide; only accumulation order differs
        for pa, pb in zip(a.params_, b.params_):
            assert np.allclose(pa.data, pb.data, atol=1e-9)

    def test_absent_class_gets_low_probability(self):
        ds = make_blobs(2, 50, [(-2.0, 0.0), (2.0, 0.0)], [0.3, 0.3], seed=7)
        clf = SoftmaxClassifier(budget=TrainingBudget(epochs=20, learning_rate=0.5),
                                num_classes=3, seed=0)
        clf.fit(ds.features, ds.labels)
        proba = clf.predict_proba(ds.features)
        assert proba.shape == (100, 3)
        assert proba[:, 2].max() < 0.2

    def test_sklearn_get_params_roundtrip(self):
        clf = MlpClassifier(num_classes=4, seed=9, hidden_width=16, init_scale=2.0)
        params = clf.get_params()
        assert params["hidden_width"] == 16
        assert params["init_scale"] == 2.0
        clone = MlpClassifier(**params)
        assert clone.get_params() == params
