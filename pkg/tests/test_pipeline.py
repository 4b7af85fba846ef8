import json

import numpy as np
import pytest

from gafi import (
    CasResult,
    EvalContext,
    FilterPolicy,
    GenerationQuota,
    NoisePolicy,
    PipelineError,
    SweepCurve,
    SweepPoint,
    TrainingBudget,
    optimize_checkpoint,
    optimize_stddev,
    optimize_threshold,
    run_accurate,
    run_gafi,
    select_best,
)
from gafi.pipeline import FastPipelineConfig, GafiReport, GeneratorRecipe, PipelineOptions, scaled_budget


def curve_from_values(axis, pairs):
    points = []
    for value, cas in pairs:
        points.append(SweepPoint(
            value=value, label=str(value),
            result=CasResult(cas_mean=cas, cas_per_seed=(cas,), fingerprint="x",
                             wall_time=0.0)))
    return SweepCurve(axis=axis, points=points)


class TestSelectBest:
    def test_cifar10_threshold_row(self):
        # transcribed published threshold ablation row (10-class dataset)
        curve = curve_from_values("threshold", [
            (0.0, 0.8845), (0.1, 0.8895), (0.2, 0.8875), (0.3, 0.8845),
            (0.4, 0.8867), (0.5, 0.8906), (0.6, 0.8872), (0.7, 0.8896),
            (0.8, 0.8809), (0.9, 0.8841)])
        value, result = select_best(curve)
        assert value == 0.5
        assert result.cas_mean == 0.8906

    def test_cifar100_threshold_row(self):
        curve = curve_from_values("threshold", [
            (0.0, 0.5913), (0.1, 0.5882), (0.2, 0.5939), (0.3, 0.5935),
            (0.4, 0.5920), (0.5, 0.5906), (0.6, 0.5879), (0.7, 0.5876),
            (0.8, 0.5728), (0.9, 0.5552)])
        value, _ = select_best(curve)
        assert value == 0.2

    def test_recycle_rows_prefer_every_epoch(self):
        # axis encoded as regeneration frequency: 0 = never, 1/N otherwise
        for row in ([0.5774, 0.5968, 0.6057, 0.6138],
                    [0.8711, 0.8972, 0.9025, 0.9042]):
            curve = curve_from_values("recycle", list(zip([0.0, 0.1, 0.2, 1.0], row)))
            value, _ = select_best(curve)
            assert value == 1.0

    def test_tie_breaks_to_smallest_value(self):
        curve = curve_from_values("stddev", [(1.0, 0.8), (1.2, 0.9), (1.5, 0.9)])
        value, _ = select_best(curve)
        assert value == 1.2

    def test_failed_points_skipped(self):
        points = (
            SweepPoint(value=0.0, label="0",
                       result=CasResult(0.7, (0.7,), "x", 0.0)),
            SweepPoint(value=0.1, label="0.1", error="starved"),
        )
        value, _ = select_best(SweepCurve(axis="threshold", points=points))
        assert value == 0.0

    def test_all_failed_raises(self):
        points = (SweepPoint(value=0.0, label="0", error="starved"),)
        with pytest.raises(PipelineError):
            select_best(SweepCurve(axis="threshold", points=points))

    def test_affine_rescaling_invariant(self):
        pairs = [(0.0, 0.40), (0.1, 0.62), (0.2, 0.55)]
        base = select_best(curve_from_values("t", pairs))[0]
        scaled = select_best(curve_from_values(
            "t", [(v, 0.2 + 0.5 * c) for v, c in pairs]))[0]
        assert base == scaled

    def test_values_must_increase(self):
        from gafi.errors import ConfigError
        with pytest.raises(ConfigError):
            curve_from_values("t", [(0.2, 0.5), (0.1, 0.6)])


class TestScaledBudget:
    def test_standard_compression(self):
        full = TrainingBudget(epochs=100, decay_epochs=(80, 90))
        fast = scaled_budget(full, 0.4)
        assert fast.epochs == 40
        assert fast.decay_epochs == (32, 36)

    def test_scale_one_is_identity(self):
        full = TrainingBudget(epochs=50, decay_epochs=(30,))
        assert scaled_budget(full, 1.0) is full

    def test_colliding_decays_dropped(self):
        full = TrainingBudget(epochs=100, decay_epochs=(60, 62))
        fast = scaled_budget(full, 0.05)
        assert fast.epochs == 5
        assert fast.decay_epochs == (3,)  # second decay rounds onto the first

    def test_out_of_range_decays_dropped(self):
        full = TrainingBudget(epochs=100, decay_epochs=(95, 99))
        fast = scaled_budget(full, 0.05)
        assert fast.epochs == 5
        assert fast.decay_epochs == ()  # both round to the epoch count itself


@pytest.fixture(scope="module")
def ctx(small_split, small_oracle, small_quota, small_budget):
    _, test = small_split
    return EvalContext(
        classifier_kind="mlp",
        full_budget=small_budget,
        fast_budget=scaled_budget(small_budget, 0.5),
        oracle=small_oracle,
        quota=small_quota,
        real_test=test,
        base_seed=31,
        fast_repeats=1,
        accurate_repeats=2,
        jobs=1,
    )


class TestSweeps:
    def test_checkpoint_stride_plus_final(self, small_checkpoints, ctx):
        fast = FastPipelineConfig(budget=ctx.fast_budget, checkpoint_stride=5)
        best, curve = optimize_checkpoint(small_checkpoints, fast, ctx)
        # 7 checkpoints: indices 0, 5 plus final (6)
        assert [p.value for p in curve.points] == [0.0, 5.0, 6.0]
        assert best in {0, 5, 6}

    def test_stride_arithmetic_eleven_points(self):
        # 50 checkpoints at stride 5 -> every 5th plus the final one
        indices = list(range(0, 50, 5))
        indices.append(49)
        assert len(indices) == 11

    def test_stddev_grid_evaluated_fully(self, small_checkpoints, ctx):
        fast = FastPipelineConfig(budget=ctx.fast_budget)
        noise = NoisePolicy(grid=(1.0, 1.2, 0.1))
        best, curve = optimize_stddev(small_checkpoints[-1], noise, fast, ctx)
        assert len(curve.points) == 3
        assert best in [p.value for p in curve.points]

    def test_threshold_sweep_and_selection(self, small_checkpoints, ctx):
        fast = FastPipelineConfig(budget=ctx.fast_budget)
        policy = FilterPolicy(threshold=None, grid=(0.0, 0.2, 0.1))
        best, curve = optimize_threshold(small_checkpoints[-1], 1.0, policy, fast, ctx)
        assert len(curve.points) == 3
        assert all(p.result is not None for p in curve.points)

    def test_starved_points_recorded_not_fatal(self, small_checkpoints, ctx,
                                               small_quota, pass_oracle):
        # oracle that always predicts class 1 starves class 0 at every threshold
        bad_ctx = EvalContext(
            classifier_kind="mlp", full_budget=ctx.full_budget,
            fast_budget=ctx.fast_budget, oracle=pass_oracle(2, target=1),
            quota=GenerationQuota(per_class=small_quota.per_class,
                                  max_attempt_factor=2),
            real_test=ctx.real_test, base_seed=1, accurate_repeats=1)
        fast = FastPipelineConfig(budget=ctx.fast_budget)
        policy = FilterPolicy(threshold=None, grid=(0.0, 0.1, 0.1))
        with pytest.raises(PipelineError):
            optimize_threshold(small_checkpoints[-1], 1.0, policy, fast, bad_ctx)

    def test_parallel_matches_sequential(self, small_checkpoints, ctx):
        fast = FastPipelineConfig(budget=ctx.fast_budget)
        noise = NoisePolicy(grid=(1.0, 1.1, 0.1))
        import dataclasses
        ctx2 = dataclasses.replace(ctx, jobs=2)
        best_seq, curve_seq = optimize_stddev(small_checkpoints[-1], noise, fast, ctx)
        best_par, curve_par = optimize_stddev(small_checkpoints[-1], noise, fast, ctx2)
        assert best_seq == best_par
        for a, b in zip(curve_seq.points, curve_par.points):
            assert a.result.cas_per_seed == b.result.cas_per_seed


class TestRunAccurate:
    def test_accurate_beats_fast_on_benchmark(self, small_checkpoints, ctx):
        members = [(small_checkpoints[-1], 1.0, 0.0)]
        accurate = run_accurate(members, ctx)
        assert 0.0 <= accurate.cas_mean <= 1.0
        assert len(accurate.cas_per_seed) == ctx.accurate_repeats


@pytest.fixture(scope="module")
def tiny_report(small_split):
    train, test = small_split
    budget = TrainingBudget(epochs=10, batch_size=64, learning_rate=0.1,
                            decay_epochs=(8,), momentum=0.9)
    opts = PipelineOptions(classifier_kind="mlp", full_budget=budget,
                           fast_budget_scale=0.5, checkpoint_stride=3,
                           noise=NoisePolicy(grid=(1.0, 1.1, 0.1)),
                           filter_grid=(0.0, 0.1, 0.1),
                           fast_repeats=1, accurate_repeats=2, jobs=1)
    recipe = GeneratorRecipe(kind="gmm", components_per_class=1, iterations=4)
    return run_gafi(train, test, recipe, [1, 2], 5, opts,
                    resolved_config={"note": "tiny"})


class TestRunGafi:
    def test_report_structure(self, tiny_report):
        assert len(tiny_report.repetitions) == 2
        assert set(tiny_report.ensembles) == {1, 2}
        assert tiny_report.gap_before == pytest.approx(
            tiny_report.real_accuracy.cas_mean - tiny_report.baseline.cas_mean)

    def test_k1_reuses_repetition_zero(self, tiny_report):
        assert tiny_report.ensembles[1] is tiny_report.repetitions[0].accurate

    def test_step_order_proven_by_timeline(self, tiny_report):
        times = {entry["step"]: entry for entry in tiny_report.timeline}
        for k in range(2):
            cp = times[f"rep{k}/checkpoint-optimization"]
            sd = times[f"rep{k}/stddev-optimization"]
            th = times[f"rep{k}/threshold-optimization"]
            assert cp["finished"] <= sd["started"]
            assert sd["finished"] <= th["started"]

    def test_wall_time_recorded_per_step(self, tiny_report):
        assert "train-generators" in tiny_report.wall_time
        assert all(v >= 0 for v in tiny_report.wall_time.values())

    def test_json_round_trip(self, tiny_report):
        blob = json.dumps(tiny_report.to_dict(), sort_keys=True)
        restored = GafiReport.from_dict(json.loads(blob))
        assert restored.to_dict() == tiny_report.to_dict()

    def test_chosen_hyperparameters_recorded(self, tiny_report):
        rec = tiny_report.repetitions[0]
        assert rec.chosen_epoch in {0, 3, 4}
        assert any(np.isclose(rec.chosen_stddev, v) for v in (1.0, 1.1))
        assert any(np.isclose(rec.chosen_threshold, v) for v in (0.0, 0.1))
