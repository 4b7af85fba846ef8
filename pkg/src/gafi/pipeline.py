"""Orchestration of the full gap-filling pipeline.

The mandated step order is: generator training with checkpoints, checkpoint
optimization, noise-stddev optimization, threshold optimization, the accurate
run, and multi-generator repetition. Sweep steps score candidates with the
cheap fast configuration (stddev 1.0, threshold 0.0, recycle period 10);
the final run uses the tuned hyperparameters with per-epoch regeneration.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import __about__
from .data import Dataset
from .errors import ConfigError, PipelineError, StarvationError
from .evaluation import CasConfig, CasResult, compute_cas, real_accuracy
from .filtering import FilterPolicy, GenerationQuota, threshold_grid
from .models import GeneratorCheckpoint, fit_classifier, fit_gmm_generator, fit_tiny_gan
from .models.classifiers import TrainingBudget
from .seeding import derive_seed
from .synthesis import DatasetSource, EnsembleSpec, NoisePolicy, RecycleSchedule, stddev_grid

__all__ = [
    "FAST_STDDEV",
    "FAST_THRESHOLD",
    "FAST_RECYCLE_PERIOD",
    "ACCURATE_RECYCLE_PERIOD",
    "FastPipelineConfig",
    "AccuratePipelineConfig",
    "SweepPoint",
    "SweepCurve",
    "EvalContext",
    "GeneratorRecipe",
    "PipelineOptions",
    "RepetitionRecord",
    "GafiReport",
    "select_best",
    "optimize_checkpoint",
    "optimize_stddev",
    "optimize_threshold",
    "run_accurate",
    "run_gafi",
    "scaled_budget",
    "AblationPoint",
    "ablate_filtering",
    "ablate_recycle",
    "ablate_expansion",
]

# Fast-pipeline constants used to score checkpoints and sweep points cheaply.
FAST_STDDEV = 1.0
FAST_THRESHOLD = 0.0
FAST_RECYCLE_PERIOD = 10
# The accurate run always regenerates the dataset every epoch.
ACCURATE_RECYCLE_PERIOD = 1


def scaled_budget(budget: TrainingBudget, scale: float) -> TrainingBudget:
    """Compress a budget's epochs and decay schedule by ``scale``.

    ``scale == 1.0`` returns the budget unchanged; this is how the extra
    fast-pipeline budget cut is disabled.
    """
    if not 0.0 < scale <= 1.0:
        raise ConfigError(f"budget scale must lie in (0, 1], got {scale}")
    if scale == 1.0:
        return budget
    epochs = max(1, round(budget.epochs * scale))
    decays: list[int] = []
    for e in budget.decay_epochs:
        se = round(e * scale)
        if 0 < se < epochs and (not decays or se > decays[-1]):
            decays.append(se)
    return replace(budget, epochs=epochs, decay_epochs=tuple(decays))


@dataclass(frozen=True)
class FastPipelineConfig:
    """Cheap scoring configuration: fixed (stddev, threshold, recycle period)
    plus a reduced classifier budget and the checkpoint stride."""

    budget: TrainingBudget
    checkpoint_stride: int = 5

    stddev = FAST_STDDEV
    threshold = FAST_THRESHOLD
    recycle_period = FAST_RECYCLE_PERIOD

    def __post_init__(self):
        if self.checkpoint_stride < 1:
            raise ConfigError("checkpoint_stride must be at least 1")


@dataclass(frozen=True)
class AccuratePipelineConfig:
    """Final-run configuration at the tuned hyperparameters."""

    checkpoint_epoch: int
    stddev: float
    threshold: float
    budget: TrainingBudget

    recycle_period = ACCURATE_RECYCLE_PERIOD


@dataclass(frozen=True)
class SweepPoint:
    value: float
    label: str
    result: CasResult | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "label": self.label,
                "result": self.result.to_dict() if self.result else None,
                "error": self.error}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPoint":
        result = CasResult.from_dict(d["result"]) if d.get("result") else None
        return cls(value=d["value"], label=d["label"], result=result,
                   error=d.get("error"))


@dataclass(frozen=True)
class SweepCurve:
    """One hyperparameter axis with a CAS measurement per grid point."""

    axis: str
    points: tuple[SweepPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        values = [p.value for p in self.points]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError(f"sweep values must be strictly increasing, got {values}")

    def to_dict(self) -> dict:
        return {"axis": self.axis, "points": [p.to_dict() for p in self.points]}

    @classmethod
    def from_dict(cls, d: dict) -> "SweepCurve":
        return cls(axis=d["axis"],
                   points=tuple(SweepPoint.from_dict(p) for p in d["points"]))


def select_best(curve: SweepCurve) -> tuple[float, CasResult]:
    """Argmax of cas_mean over the curve; ties break toward the smallest
    hyperparameter value. Failed points are skipped."""
    best: tuple[float, CasResult] | None = None
    for point in curve.points:
        if point.result is None:
            continue
        if best is None or point.result.cas_mean > best[1].cas_mean:
            best = (point.value, point.result)
    if best is None:
        raise PipelineError(
            f"no valid points on the {curve.axis} curve; every grid value failed")
    return best


@dataclass(frozen=True)
class EvalContext:
    """Everything a sweep step needs to score one configuration."""

    classifier_kind: str
    full_budget: TrainingBudget
    fast_budget: TrainingBudget
    oracle: object
    quota: GenerationQuota
    real_test: Dataset
    base_seed: int
    fast_repeats: int = 1
    accurate_repeats: int = 3
    jobs: int = 1

    def fast_seeds(self, tag: str, index: int) -> tuple[int, ...]:
        return tuple(derive_seed(self.base_seed, tag, index, r)
                     for r in range(self.fast_repeats))

    def accurate_seeds(self, tag: str) -> tuple[int, ...]:
        return tuple(derive_seed(self.base_seed, tag, r)
                     for r in range(self.accurate_repeats))


def _single_source(ctx: EvalContext, checkpoint: GeneratorCheckpoint, stddev: float,
                   policy: FilterPolicy, seed_tag: str) -> DatasetSource:
    return DatasetSource(
        ensemble=EnsembleSpec(checkpoints=(checkpoint,)),
        noise=NoisePolicy(stddev=stddev),
        filter_policy=policy,
        oracle=ctx.oracle,
        quota=ctx.quota,
        base_seed=derive_seed(ctx.base_seed, "source", seed_tag),
    )


def _eval_point(payload):
    source, schedule, real_test, config, allow_starvation = payload
    try:
        return "ok", compute_cas(source, schedule, real_test, config)
    except StarvationError as exc:
        if not allow_starvation:
            raise
        return "starved", str(exc)


def _run_points(payloads: list, jobs: int) -> list:
    if jobs <= 1 or len(payloads) <= 1:
        return [_eval_point(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_eval_point, payloads))


def _sweep(ctx: EvalContext, axis: str, entries, allow_starvation: bool = False) -> SweepCurve:
    """Evaluate (value, label, source, schedule, seeds) entries, possibly in
    parallel; per-point seeds keep results identical either way."""
    payloads = []
    for value, label, source, schedule, seeds in entries:
        config = CasConfig(classifier_kind=ctx.classifier_kind,
                           budget=ctx.fast_budget, seeds=seeds)
        payloads.append((source, schedule, ctx.real_test, config, allow_starvation))
    outcomes = _run_points(payloads, ctx.jobs)
    points = []
    for (value, label, *_), (status, result) in zip(entries, outcomes):
        if status == "ok":
            points.append(SweepPoint(value=value, label=label, result=result))
        else:
            points.append(SweepPoint(value=value, label=label, error=result))
    return SweepCurve(axis=axis, points=points)


def optimize_checkpoint(checkpoints: list[GeneratorCheckpoint],
                        fast: FastPipelineConfig,
                        ctx: EvalContext) -> tuple[int, SweepCurve]:
    """Score every ``stride``-th checkpoint (plus the final one) with the fast
    configuration and return the epoch with the best CAS."""
    if not checkpoints:
        raise ConfigError("checkpoint list must be non-empty")
    indices = list(range(0, len(checkpoints), fast.checkpoint_stride))
    if indices[-1] != len(checkpoints) - 1:
        indices.append(len(checkpoints) - 1)
    schedule = RecycleSchedule.every(fast.recycle_period)
    entries = []
    for i in indices:
        cp = checkpoints[i]
        source = _single_source(ctx, cp, fast.stddev, FilterPolicy.at(fast.threshold),
                                f"checkpoint-{cp.epoch}")
        entries.append((float(cp.epoch), str(cp.epoch), source, schedule,
                        ctx.fast_seeds("sweep-checkpoint", cp.epoch)))
    try:
        curve = _sweep(ctx, "checkpoint", entries)
    except Exception as exc:
        exc.args = (f"checkpoint optimization: {exc}",) + exc.args[1:]
        raise
    best_value, _ = select_best(curve)
    return int(best_value), curve


def optimize_stddev(checkpoint: GeneratorCheckpoint, noise: NoisePolicy,
                    fast: FastPipelineConfig,
                    ctx: EvalContext) -> tuple[float, SweepCurve]:
    """Sweep the latent stddev grid at the frozen best checkpoint."""
    schedule = RecycleSchedule.every(fast.recycle_period)
    entries = []
    for i, s in enumerate(stddev_grid(noise)):
        source = _single_source(ctx, checkpoint, s, FilterPolicy.at(fast.threshold),
                                f"stddev-{i}")
        entries.append((s, f"{s:g}", source, schedule, ctx.fast_seeds("sweep-stddev", i)))
    curve = _sweep(ctx, "stddev", entries)
    best_value, _ = select_best(curve)
    return best_value, curve


def optimize_threshold(checkpoint: GeneratorCheckpoint, stddev: float,
                       policy: FilterPolicy, fast: FastPipelineConfig,
                       ctx: EvalContext) -> tuple[float, SweepCurve]:
    """Sweep the filtering-threshold grid at the frozen (checkpoint, stddev).

    Runs strictly after stddev optimization. Points that starve are recorded
    as failures and excluded from the argmax; if every point starves the
    sweep raises, demanding a lower grid.
    """
    schedule = RecycleSchedule.every(fast.recycle_period)
    entries = []
    for i, t in enumerate(threshold_grid(policy)):
        source = _single_source(ctx, checkpoint, stddev, FilterPolicy.at(t, policy.grid),
                                f"threshold-{i}")
        entries.append((t, f"{t:g}", source, schedule,
                        ctx.fast_seeds("sweep-threshold", i)))
    curve = _sweep(ctx, "threshold", entries, allow_starvation=True)
    best_value, _ = select_best(curve)
    return best_value, curve


def run_accurate(members: list[tuple[GeneratorCheckpoint, float, float]],
                 ctx: EvalContext, seed_tag: str = "accurate") -> CasResult:
    """Final evaluation: recycle period 1, full budget, per-member tuned
    (stddev, threshold)."""
    source = DatasetSource(
        ensemble=EnsembleSpec(checkpoints=tuple(cp for cp, _, _ in members)),
        noise=tuple(NoisePolicy(stddev=s) for _, s, _ in members),
        filter_policy=tuple(FilterPolicy.at(t) for _, _, t in members),
        oracle=ctx.oracle,
        quota=ctx.quota,
        base_seed=derive_seed(ctx.base_seed, "source", seed_tag),
    )
    config = CasConfig(classifier_kind=ctx.classifier_kind, budget=ctx.full_budget,
                       seeds=ctx.accurate_seeds(seed_tag))
    return compute_cas(source, RecycleSchedule.every(ACCURATE_RECYCLE_PERIOD),
                       ctx.real_test, config)


@dataclass(frozen=True)
class GeneratorRecipe:
    """How to train one generator repetition."""

    kind: str = "gmm"
    components_per_class: int = 1
    iterations: int = 10
    latent_dim: int = 4
    hidden_width: int = 32
    epochs: int = 30

    def __post_init__(self):
        if self.kind not in ("gmm", "tiny-gan"):
            raise ConfigError(f"unknown generator kind {self.kind!r}")

    def train(self, train: Dataset, seed: int) -> list[GeneratorCheckpoint]:
        if self.kind == "gmm":
            return fit_gmm_generator(train, self.components_per_class,
                                     self.iterations, seed)
        return fit_tiny_gan(train, self.latent_dim, self.hidden_width,
                            self.epochs, seed)


@dataclass(frozen=True)
class PipelineOptions:
    """Tunable pipeline settings; the sweep constants themselves are fixed."""

    classifier_kind: str = "mlp"
    full_budget: TrainingBudget = TrainingBudget(
        epochs=100, batch_size=64, learning_rate=0.1, decay_epochs=(80, 90),
        decay_factor=0.1, weight_decay=0.0, momentum=0.9)
    fast_budget_scale: float = 0.4
    checkpoint_stride: int = 5
    noise: NoisePolicy = NoisePolicy()
    filter_grid: tuple[float, float, float] = (0.0, 0.9, 0.1)
    fast_repeats: int = 1
    accurate_repeats: int = 3
    max_attempt_factor: int = 200
    jobs: int = 1

    def fast_budget(self) -> TrainingBudget:
        return scaled_budget(self.full_budget, self.fast_budget_scale)


@dataclass(frozen=True)
class RepetitionRecord:
    """Steps 2 through 5 for one trained generator."""

    index: int
    generator_seed: int
    checkpoint_curve: SweepCurve
    stddev_curve: SweepCurve
    threshold_curve: SweepCurve
    chosen_epoch: int
    chosen_stddev: float
    chosen_threshold: float
    accurate: CasResult

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "generator_seed": self.generator_seed,
            "checkpoint_curve": self.checkpoint_curve.to_dict(),
            "stddev_curve": self.stddev_curve.to_dict(),
            "threshold_curve": self.threshold_curve.to_dict(),
            "chosen_epoch": self.chosen_epoch,
            "chosen_stddev": self.chosen_stddev,
            "chosen_threshold": self.chosen_threshold,
            "accurate": self.accurate.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RepetitionRecord":
        return cls(
            index=d["index"], generator_seed=d["generator_seed"],
            checkpoint_curve=SweepCurve.from_dict(d["checkpoint_curve"]),
            stddev_curve=SweepCurve.from_dict(d["stddev_curve"]),
            threshold_curve=SweepCurve.from_dict(d["threshold_curve"]),
            chosen_epoch=d["chosen_epoch"], chosen_stddev=d["chosen_stddev"],
            chosen_threshold=d["chosen_threshold"],
            accurate=CasResult.from_dict(d["accurate"]),
        )


@dataclass(frozen=True)
class GafiReport:
    """Complete pipeline record: every number in it can be recomputed from the
    recorded seeds and configuration."""

    version: str
    config: dict
    seed: int
    repetitions: tuple[RepetitionRecord, ...]
    ensembles: dict[int, CasResult]
    baseline: CasResult
    real_accuracy: CasResult
    gap_before: float
    gap_after: dict[int, float]
    wall_time: dict[str, float]
    timeline: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "config": self.config,
            "seed": self.seed,
            "repetitions": [r.to_dict() for r in self.repetitions],
            "ensembles": {str(k): v.to_dict() for k, v in self.ensembles.items()},
            "baseline": self.baseline.to_dict(),
            "real_accuracy": self.real_accuracy.to_dict(),
            "gap_before": self.gap_before,
            "gap_after": {str(k): v for k, v in self.gap_after.items()},
            "wall_time": self.wall_time,
            "timeline": list(self.timeline),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GafiReport":
        return cls(
            version=d["version"], config=d["config"], seed=d["seed"],
            repetitions=tuple(RepetitionRecord.from_dict(r) for r in d["repetitions"]),
            ensembles={int(k): CasResult.from_dict(v) for k, v in d["ensembles"].items()},
            baseline=CasResult.from_dict(d["baseline"]),
            real_accuracy=CasResult.from_dict(d["real_accuracy"]),
            gap_before=d["gap_before"],
            gap_after={int(k): v for k, v in d["gap_after"].items()},
            wall_time=d["wall_time"],
            timeline=tuple(d["timeline"]),
        )


@dataclass(frozen=True)
class AblationPoint:
    """One single-technique measurement; the label is the human-readable
    hyperparameter value (``off``, ``static``, ``0.3``, ...)."""

    label: str
    result: CasResult | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {"label": self.label,
                "result": self.result.to_dict() if self.result else None,
                "error": self.error}


def _ablation_points(ctx: EvalContext, entries, allow_starvation: bool) -> list[AblationPoint]:
    payloads = []
    for label, source, schedule, seeds in entries:
        config = CasConfig(classifier_kind=ctx.classifier_kind,
                           budget=ctx.full_budget, seeds=seeds)
        payloads.append((source, schedule, ctx.real_test, config, allow_starvation))
    outcomes = _run_points(payloads, ctx.jobs)
    points = []
    for (label, *_), (status, result) in zip(entries, outcomes):
        if status == "ok":
            points.append(AblationPoint(label=label, result=result))
        else:
            points.append(AblationPoint(label=label, error=result))
    return points


def ablate_filtering(checkpoint: GeneratorCheckpoint, ctx: EvalContext,
                     grid: tuple[float, float, float] = (0.0, 0.9, 0.1)) -> list[AblationPoint]:
    """Threshold curve with every other technique at baseline: static dataset,
    stddev 1.0, full budget. The first point disables filtering entirely."""
    schedule = RecycleSchedule.static()
    entries = [("off",
                _single_source(ctx, checkpoint, 1.0, FilterPolicy.off(), "ablate-filter-off"),
                schedule, ctx.accurate_seeds("ablate-filter-off"))]
    for i, t in enumerate(threshold_grid(FilterPolicy(threshold=None, grid=grid))):
        entries.append((f"{t:g}",
                        _single_source(ctx, checkpoint, 1.0, FilterPolicy.at(t, grid),
                                       f"ablate-filter-{i}"),
                        schedule, ctx.accurate_seeds(f"ablate-filter-{i}")))
    return _ablation_points(ctx, entries, allow_starvation=True)


def ablate_recycle(checkpoint: GeneratorCheckpoint, ctx: EvalContext,
                   periods=("static", 10, 5, 1)) -> list[AblationPoint]:
    """Recycle-period curve at baseline settings (no filtering, stddev 1.0)."""
    entries = []
    for i, period in enumerate(periods):
        schedule = (RecycleSchedule.static() if period == "static"
                    else RecycleSchedule.every(int(period)))
        entries.append((schedule.label(),
                        _single_source(ctx, checkpoint, 1.0, FilterPolicy.off(),
                                       f"ablate-recycle-{i}"),
                        schedule, ctx.accurate_seeds(f"ablate-recycle-{i}")))
    return _ablation_points(ctx, entries, allow_starvation=False)


def ablate_expansion(checkpoint: GeneratorCheckpoint, ctx: EvalContext,
                     noise: NoisePolicy = NoisePolicy()) -> dict[str, list[AblationPoint]]:
    """Stddev curves, unfiltered and filtered at threshold 0.0, static dataset.

    Pairs the two curves so the protective effect of filtering under widened
    noise is directly comparable.
    """
    schedule = RecycleSchedule.static()
    curves: dict[str, list[AblationPoint]] = {}
    for name, policy in (("unfiltered", FilterPolicy.off()),
                         ("filtered", FilterPolicy.at(0.0))):
        entries = []
        for i, s in enumerate(stddev_grid(noise)):
            entries.append((f"{s:g}",
                            _single_source(ctx, checkpoint, s, policy,
                                           f"ablate-expansion-{name}-{i}"),
                            schedule, ctx.accurate_seeds(f"ablate-expansion-{name}-{i}")))
        curves[name] = _ablation_points(ctx, entries, allow_starvation=(name == "filtered"))
    return curves


class _Timer:
    def __init__(self):
        self.wall_time: dict[str, float] = {}
        self.timeline: list[dict] = []

    def step(self, name: str):
        return _TimerStep(self, name)


class _TimerStep:
    def __init__(self, timer: _Timer, name: str):
        self.timer = timer
        self.name = name

    def __enter__(self):
        self.started = time.time()
        self.perf = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.timer.wall_time[self.name] = time.perf_counter() - self.perf
        self.timer.timeline.append(
            {"step": self.name, "started": self.started, "finished": time.time()})
        return False


def run_gafi(real_train: Dataset, real_test: Dataset, recipe: GeneratorRecipe,
             k_list: list[int], base_seed: int,
             options: PipelineOptions = PipelineOptions(),
             resolved_config: dict | None = None) -> GafiReport:
    """Run the whole pipeline and assemble the report.

    Trains max(k_list) generators with different initialization seeds on the
    same data, runs checkpoint/stddev/threshold optimization plus the accurate
    run per repetition, then evaluates the requested ensemble sizes with each
    member sampled at its own tuned hyperparameters. Baseline and real-data
    references complete the gap accounting.
    """
    if not k_list:
        raise ConfigError("k_list must be non-empty")
    k_list = sorted(set(int(k) for k in k_list))
    if k_list[0] < 1:
        raise ConfigError("ensemble sizes must be at least 1")
    repetitions_needed = k_list[-1]

    timer = _Timer()
    fast_budget = options.fast_budget()
    fast = FastPipelineConfig(budget=fast_budget,
                              checkpoint_stride=options.checkpoint_stride)

    with timer.step("train-generators"):
        generator_seeds = [derive_seed(base_seed, "generator", k)
                           for k in range(repetitions_needed)]
        all_checkpoints = [recipe.train(real_train, s) for s in generator_seeds]

    with timer.step("train-oracle"):
        oracle = fit_classifier(options.classifier_kind, real_train,
                                options.full_budget, derive_seed(base_seed, "oracle"))

    quota = GenerationQuota.from_dataset(real_train, options.max_attempt_factor)

    records: list[RepetitionRecord] = []
    chosen: list[tuple[GeneratorCheckpoint, float, float]] = []
    for k in range(repetitions_needed):
        ctx = EvalContext(
            classifier_kind=options.classifier_kind,
            full_budget=options.full_budget, fast_budget=fast_budget,
            oracle=oracle, quota=quota, real_test=real_test,
            base_seed=derive_seed(base_seed, "rep", k),
            fast_repeats=options.fast_repeats,
            accurate_repeats=options.accurate_repeats, jobs=options.jobs)
        checkpoints = all_checkpoints[k]
        try:
            with timer.step(f"rep{k}/checkpoint-optimization"):
                best_epoch, cp_curve = optimize_checkpoint(checkpoints, fast, ctx)
            best_cp = next(cp for cp in checkpoints if cp.epoch == best_epoch)
            with timer.step(f"rep{k}/stddev-optimization"):
                best_s, s_curve = optimize_stddev(best_cp, options.noise, fast, ctx)
            with timer.step(f"rep{k}/threshold-optimization"):
                best_t, t_curve = optimize_threshold(
                    best_cp, best_s, FilterPolicy(threshold=None, grid=options.filter_grid),
                    fast, ctx)
            with timer.step(f"rep{k}/accurate"):
                accurate = run_accurate([(best_cp, best_s, best_t)], ctx)
        except Exception as exc:
            exc.args = (f"repetition {k}: {exc}",) + exc.args[1:]
            raise
        chosen.append((best_cp, best_s, best_t))
        records.append(RepetitionRecord(
            index=k, generator_seed=generator_seeds[k],
            checkpoint_curve=cp_curve, stddev_curve=s_curve, threshold_curve=t_curve,
            chosen_epoch=best_epoch, chosen_stddev=best_s, chosen_threshold=best_t,
            accurate=accurate))

    ensemble_ctx = EvalContext(
        classifier_kind=options.classifier_kind,
        full_budget=options.full_budget, fast_budget=fast_budget,
        oracle=oracle, quota=quota, real_test=real_test, base_seed=base_seed,
        fast_repeats=options.fast_repeats,
        accurate_repeats=options.accurate_repeats, jobs=options.jobs)

    ensembles: dict[int, CasResult] = {}
    for k in k_list:
        if k == 1:
            # A 1-member ensemble is exactly repetition 0's accurate run.
            ensembles[1] = records[0].accurate
            continue
        with timer.step(f"ensemble-k{k}"):
            ensembles[k] = run_accurate(chosen[:k], ensemble_ctx, seed_tag=f"ensemble-{k}")

    with timer.step("baseline"):
        baseline_source = DatasetSource(
            ensemble=EnsembleSpec(checkpoints=(all_checkpoints[0][-1],)),
            noise=NoisePolicy(stddev=FAST_STDDEV),
            filter_policy=FilterPolicy.off(),
            oracle=oracle, quota=quota,
            base_seed=derive_seed(base_seed, "source", "baseline"))
        baseline = compute_cas(
            baseline_source, RecycleSchedule.static(), real_test,
            CasConfig(classifier_kind=options.classifier_kind, budget=options.full_budget,
                      seeds=tuple(derive_seed(base_seed, "baseline", r)
                                  for r in range(options.accurate_repeats))))

    with timer.step("real-accuracy"):
        real = real_accuracy(
            real_train, real_test,
            CasConfig(classifier_kind=options.classifier_kind, budget=options.full_budget,
                      seeds=tuple(derive_seed(base_seed, "real", r)
                                  for r in range(options.accurate_repeats))))

    gap_before = real.cas_mean - baseline.cas_mean
    gap_after = {k: real.cas_mean - ensembles[k].cas_mean for k in k_list}

    return GafiReport(
        version=__about__.__version__,
        config=resolved_config if resolved_config is not None else {},
        seed=base_seed,
        repetitions=tuple(records),
        ensembles=ensembles,
        baseline=baseline,
        real_accuracy=real,
        gap_before=gap_before,
        gap_after=gap_after,
        wall_time=timer.wall_time,
        timeline=tuple(timer.timeline),
    )
