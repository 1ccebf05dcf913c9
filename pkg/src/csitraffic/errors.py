"""Exception hierarchy shared across the package.

Plain ValueError/IndexError are used for local argument mistakes; the
classes below mark conditions a caller (notably the CLI) may want to map
to exit codes: file format problems, bad scenario/training data, and
numerical divergence during training.
"""


class CsiTrafficError(Exception):
    """Base class for package-specific errors."""


class FormatError(CsiTrafficError):
    """A file does not match its declared binary/JSON format."""


class PayloadLengthError(FormatError):
    """A binary payload is shorter or longer than its header declares."""


class UnsupportedShapeError(FormatError):
    """A file is well-formed but its dimensions are not supported."""


class ScenarioError(CsiTrafficError):
    """A synthetic scenario violates its invariants."""


class DataError(CsiTrafficError):
    """A dataset cannot be used (missing labels, class too small, ...)."""


class TrainingDivergedError(CsiTrafficError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"non-finite training loss at epoch {epoch}")


class PipelineStageError(CsiTrafficError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage, cause):
        self.stage = stage
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")
