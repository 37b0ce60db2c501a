"""Error taxonomy shared across the pipeline.

Exit-code convention: 1 usage, 2 bad input data, 3 internal invariant
violation. The CLI maps exceptions to exit codes through `exit_code`.
"""
from __future__ import annotations

__all__ = [
    "PipelineError",
    "UsageError",
    "DataError",
    "InternalError",
    "TableFormatError",
    "BoundsError",
    "CheckpointMismatchError",
    "AugmentationError",
    "RelabelingError",
    "QueryError",
]


class PipelineError(Exception):
    exit_code = 3


class UsageError(PipelineError):
    exit_code = 1


class DataError(PipelineError):
    exit_code = 2


class InternalError(PipelineError):
    exit_code = 3


class TableFormatError(DataError):
    """Malformed table document: bad JSON, ragged grid, bad label vector."""


class BoundsError(DataError):
    """Index outside the owning table's grid."""


class CheckpointMismatchError(DataError):
    """Checkpoint dimensions or format id disagree with the requesting model."""


class AugmentationError(InternalError):
    """Augmented table violates rectangularity or label-length invariants."""


class RelabelingError(InternalError):
    """Composition relabeling produced an inconsistent label state."""


class QueryError(UsageError):
    """Screening predicate references an unknown property or bad syntax."""
