import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gafi import (
    ConfigError,
    FilterPolicy,
    GenerationQuota,
    StarvationError,
    generate_filtered,
    passes_filter,
    threshold_grid,
)
from gafi.models import make_sampler


class FixedProbaOracle:
    """Returns one constant probability row; predict is its argmax."""

    def __init__(self, row):
        self.row = np.asarray(row, dtype=float)

    def predict_proba(self, X):
        return np.tile(self.row, (np.asarray(X).shape[0], 1))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


class TestPassesFilter:
    def test_inclusive_threshold(self):
        oracle = FixedProbaOracle([0.7, 0.2, 0.1])
        assert passes_filter(np.zeros(2), 0, oracle, 0.7) is True

    def test_just_above_threshold_fails(self):
        oracle = FixedProbaOracle([0.7, 0.2, 0.1])
        assert passes_filter(np.zeros(2), 0, oracle, 0.71) is False

    def test_misclassified_always_discarded(self):
        oracle = FixedProbaOracle([0.7, 0.2, 0.1])
        for t in (0.0, 0.1, 0.5):
            assert passes_filter(np.zeros(2), 1, oracle, t) is False

    def test_threshold_range_validated(self):
        oracle = FixedProbaOracle([1.0])
        with pytest.raises(ConfigError):
            passes_filter(np.zeros(1), 0, oracle, 1.0)


class TestThresholdGrid:
    def test_default_grid_matches_protocol(self):
        grid = threshold_grid(FilterPolicy())
        assert len(grid) == 10
        assert np.allclose(grid, np.arange(10) * 0.1, atol=1e-12)

    def test_single_point(self):
        grid = threshold_grid(FilterPolicy(grid=(0.5, 0.5, 0.1)))
        assert grid == [0.5]

    @given(lo=st.floats(0, 0.5), width=st.floats(0, 0.4), step=st.floats(0.01, 0.3))
    @settings(max_examples=50, deadline=None)
    def test_values_within_bounds(self, lo, width, step):
        hi = min(lo + width, 0.99)
        grid = threshold_grid(FilterPolicy(grid=(lo, hi, step)))
        assert grid[0] == lo
        assert all(lo - 1e-12 <= v <= hi + 1e-12 for v in grid)


def pool_sampler(pools):
    """Serves per-class candidate pools in order, cycling past the end."""
    cursors = {}

    def sampler(label, count, stddev, seed):
        pool = pools[label]
        start = cursors.get(label, 0)
        idx = [(start + i) % len(pool) for i in range(count)]
        cursors[label] = start + count
        return pool[idx]

    return sampler


class TestGenerateFiltered:
    def test_pass_through_oracle_identical_to_unfiltered(self, small_checkpoints,
                                                         pass_oracle):
        cp = small_checkpoints[-1]
        sampler = make_sampler(cp)
        quota = GenerationQuota(per_class=(120, 0))
        filtered = generate_filtered(sampler, pass_oracle(2, target=0),
                                     FilterPolicy.at(0.9), quota, 1.0, seed=5)
        unfiltered = generate_filtered(sampler, None, FilterPolicy.off(),
                                       quota, 1.0, seed=5)
        assert np.array_equal(filtered.features, unfiltered.features)

    def test_quota_exact_and_refiltered(self, small_checkpoints, small_oracle,
                                        small_quota):
        cp = small_checkpoints[-1]
        ds = generate_filtered(make_sampler(cp), small_oracle, FilterPolicy.at(0.0),
                               small_quota, 1.0, seed=9)
        assert ds.class_counts().tolist() == list(small_quota.per_class)
        for i in range(0, len(ds), 37):
            assert passes_filter(ds.features[i], int(ds.labels[i]), small_oracle, 0.0)

    def test_matches_brute_force_over_pool(self, small_oracle):
        rng = np.random.default_rng(3)
        pools = {0: rng.normal(0, 1.5, size=(500, 2)),
                 1: rng.normal(0, 1.5, size=(500, 2))}
        t = 0.6
        for c in (0, 1):
            # brute force: apply passes_filter to every candidate in order
            kept = [row for row in pools[c]
                    if passes_filter(row, c, small_oracle, t)]
            if not kept:
                continue
            quota = GenerationQuota(per_class=tuple(
                len(kept) if k == c else 0 for k in (0, 1)))
            out = generate_filtered(pool_sampler(pools), small_oracle,
                                    FilterPolicy.at(t), quota, 1.0, seed=0)
            assert np.array_equal(out.features, np.array(kept))

    def test_monotone_subset_in_threshold(self, small_oracle):
        rng = np.random.default_rng(4)
        pool = rng.normal(0, 1.5, size=(400, 2))
        masks = {}
        for t in threshold_grid(FilterPolicy()):
            proba = small_oracle.predict_proba(pool)
            pred = np.argmax(proba, axis=1)
            masks[t] = (pred == 0) & (proba[:, 0] >= t)
        ts = sorted(masks)
        for lo, hi in zip(ts, ts[1:]):
            assert np.all(masks[hi] <= masks[lo])  # accepted(hi) subset of accepted(lo)

    def test_starvation_error_reports_details(self, small_checkpoints, pass_oracle):
        cp = small_checkpoints[-1]
        # oracle always predicts class 1, so class 0 never passes
        oracle = pass_oracle(2, target=1)
        quota = GenerationQuota(per_class=(10, 0), max_attempt_factor=5)
        with pytest.raises(StarvationError) as err:
            generate_filtered(make_sampler(cp), oracle, FilterPolicy.at(0.0),
                              quota, 1.0, seed=1)
        assert err.value.class_index == 0
        assert err.value.acceptance_rate == 0.0
        assert err.value.threshold == 0.0

    def test_deterministic_given_seed(self, small_checkpoints, small_oracle,
                                      small_quota):
        cp = small_checkpoints[-1]
        a = generate_filtered(make_sampler(cp), small_oracle, FilterPolicy.at(0.2),
                              small_quota, 1.2, seed=11)
        b = generate_filtered(make_sampler(cp), small_oracle, FilterPolicy.at(0.2),
                              small_quota, 1.2, seed=11)
        assert np.array_equal(a.features, b.features)

    def test_zero_class_quota_skipped(self, small_checkpoints, small_oracle):
        cp = small_checkpoints[-1]
        quota = GenerationQuota(per_class=(0, 50))
        ds = generate_filtered(make_sampler(cp), small_oracle, FilterPolicy.at(0.0),
                               quota, 1.0, seed=2)
        assert ds.class_counts().tolist() == [0, 50]


class TestQuota:
    def test_total_must_be_positive(self):
        with pytest.raises(ConfigError):
            GenerationQuota(per_class=(0, 0))

    def test_from_dataset_matches_counts(self, small_split):
        train, _ = small_split
        quota = GenerationQuota.from_dataset(train)
        assert list(quota.per_class) == train.class_counts().tolist()
