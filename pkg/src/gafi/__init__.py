"""gafi: turn a checkpointed conditional generative model into an optimized
synthetic-data source for training classifiers.

Success is measured by the Classification Accuracy Score (CAS): the accuracy
on held-out real data of a classifier trained exclusively on synthetic data.
The package provides confidence-gated sample filtering, periodic dataset
regeneration during training, widened latent-noise sampling, and a pipeline
that tunes them in a fixed order (checkpoint, then noise stddev, then
filtering threshold) before a final high-diversity run.
"""

from .__about__ import __version__
from .data import (
    Dataset,
    LabeledSample,
    NormalizationStats,
    SplitSpec,
    load_csv,
    make_blobs,
    make_rings,
    normalize,
    split,
    write_csv,
)
from .errors import (
    CheckpointFormatError,
    ConfigError,
    GafiError,
    IngestError,
    PipelineError,
    SplitError,
    StarvationError,
    TrainingError,
)
from .evaluation import CasConfig, CasResult, accuracy, compute_cas, real_accuracy
from .filtering import (
    FilterPolicy,
    GenerationQuota,
    generate_filtered,
    passes_filter,
    threshold_grid,
)
from .models import (
    GeneratorCheckpoint,
    GmmGenerator,
    MlpClassifier,
    NoiseSource,
    SoftmaxClassifier,
    TinyGanGenerator,
    TrainingBudget,
    fit_classifier,
    fit_gmm_generator,
    fit_tiny_gan,
    gan_sample,
    gmm_sample,
    load_checkpoint,
    make_sampler,
    sample_latent,
    save_checkpoint,
)
from .pipeline import (
    AccuratePipelineConfig,
    EvalContext,
    FastPipelineConfig,
    GafiReport,
    GeneratorRecipe,
    PipelineOptions,
    SweepCurve,
    SweepPoint,
    optimize_checkpoint,
    optimize_stddev,
    optimize_threshold,
    run_accurate,
    run_gafi,
    select_best,
)
from .synthesis import (
    DatasetSource,
    EnsembleSpec,
    IdentitySource,
    NoisePolicy,
    RecycleSchedule,
    realize,
    should_recycle,
    stddev_grid,
    train_with_recycle,
)
