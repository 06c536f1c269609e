from .suite import (
    DEFAULT_HYPERPARAMETERS,
    MODEL_LABELS,
    FittedModel,
    ModelSpec,
    PerfMetric,
    accuracy,
    f1_score,
    feature_importance,
    fit,
    performance,
    predict,
    predict_labels,
)

__all__ = [
    "DEFAULT_HYPERPARAMETERS",
    "MODEL_LABELS",
    "FittedModel",
    "ModelSpec",
    "PerfMetric",
    "accuracy",
    "f1_score",
    "feature_importance",
    "fit",
    "performance",
    "predict",
    "predict_labels",
]
