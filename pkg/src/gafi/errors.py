"""Exception hierarchy shared by all gafi modules."""


class GafiError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(GafiError):
    """Invalid configuration: bad constructor arguments, malformed config files,
    unknown config keys."""


class IngestError(GafiError):
    """Malformed external data, e.g. a CSV row that cannot be parsed."""


class SplitError(GafiError):
    """A dataset cannot be split as requested."""


class TrainingError(GafiError):
    """Model fitting failed (empty class, non-finite loss, ...)."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class StarvationError(GafiError):
    """Rejection sampling could not meet a class quota within the attempt budget.

    Signals a filtering threshold that is too high for the generator at hand.
    """

    def __init__(self, class_index: int, acceptance_rate: float, threshold: float,
                 attempts: int, quota: int):
        super().__init__(
            f"class {class_index}: accepted {acceptance_rate:.4%} of {attempts} "
            f"candidates at threshold {threshold}, quota {quota} not met"
        )
        self.class_index = class_index
        self.acceptance_rate = acceptance_rate
        self.threshold = threshold
        self.attempts = attempts
        self.quota = quota


class CheckpointFormatError(GafiError):
    """A checkpoint file is corrupt or has an unsupported format version."""


class PipelineError(GafiError):
    """A pipeline step cannot produce a usable result."""
