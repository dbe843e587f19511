"""Python access to the droidsynth core: metrics, sanitization, validation,
splitting and the five classifiers."""

from ._core import (
    DataError,
    LeakageError,
    Model,
    ProviderError,
    basic_metrics,
    bootstrap_ci,
    confusion,
    desanitize,
    evaluate_predictions,
    roc_auc,
    row_hash,
    sanitize,
    stratified_split,
    train,
    validate_record,
)

__all__ = [
    "DataError",
    "LeakageError",
    "Model",
    "ProviderError",
    "basic_metrics",
    "bootstrap_ci",
    "confusion",
    "desanitize",
    "evaluate_predictions",
    "roc_auc",
    "row_hash",
    "sanitize",
    "stratified_split",
    "train",
    "validate_record",
]
