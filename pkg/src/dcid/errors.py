"""Exception types shared across the package.

The CLI maps ``ConfigError`` and ``ValueError`` subclasses to exit code 1
and everything raised at run time to exit code 2.
"""


class ConfigError(ValueError):
    """Invalid configuration or input that can never succeed."""


class RankDeficiencyError(ValueError):
    """A regression has too few rows (or no variance) to be solvable."""


class SampleSizeError(ValueError):
    """Too few samples for the requested decomposition."""


class EmptyEstimateError(ValueError):
    """A shared estimate with zero selected components was asked to predict."""


class SelectionError(ValueError):
    """Feature selection is undefined for the given head weights."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss!r}")
        self.epoch = epoch
        self.loss = loss
