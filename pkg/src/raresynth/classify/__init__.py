"""Random-forest classifier and binary metrics."""

from .forest import ForestConfig, RandomForest, Tree, fit_forest, predict_proba
from .metrics import (
    BinaryMetrics,
    Confusion,
    balanced_accuracy,
    binary_metrics,
    f1,
    mcc,
    mcc_normalized,
    pr_auc,
    stratified_kfold,
)

__all__ = [
    "ForestConfig", "RandomForest", "Tree", "fit_forest", "predict_proba",
    "BinaryMetrics", "Confusion", "balanced_accuracy", "binary_metrics", "f1",
    "mcc", "mcc_normalized", "pr_auc", "stratified_kfold",
]
