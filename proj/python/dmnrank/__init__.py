"""Response ranking for information-seeking conversations with external knowledge."""

from ._core import (
    ConfigError,
    DataError,
    Index,
    Knowledge,
    Model,
    NumericError,
    average_precision,
    evaluate,
    expand_response,
    ppmi_matrix,
    recall_at_k,
    reciprocal_rank,
    run_command,
    tokenize,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Index",
    "Knowledge",
    "Model",
    "NumericError",
    "average_precision",
    "evaluate",
    "expand_response",
    "ppmi_matrix",
    "recall_at_k",
    "reciprocal_rank",
    "run_command",
    "tokenize",
]
