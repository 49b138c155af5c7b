"""Exception hierarchy shared across the package.

ParameterError means the caller passed an argument or configuration value
that violates a documented contract; DataError means the input data itself
cannot be processed. The CLI maps these onto distinct exit codes.
"""


class HeartspecError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(HeartspecError, ValueError):
    """An argument or configuration value violates its contract."""


class DataError(HeartspecError, ValueError):
    """Input data is missing, malformed, or degenerate."""


class PipelineError(HeartspecError, RuntimeError):
    """A batch-pipeline stage failed. Carries stage and segment context."""

    def __init__(self, stage, message, segment_id=None):
        self.stage = stage
        self.segment_id = segment_id
        prefix = f"[{stage}]" if segment_id is None else f"[{stage}:{segment_id}]"
        super().__init__(f"{prefix} {message}")
