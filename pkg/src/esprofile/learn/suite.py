"""Fixed-hyperparameter model suite and performance metrics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import DegenerateTraining, EmptyTest
from ..tabular import Dataset
from .estimators import (
    GaussianNB,
    KNeighbors,
    LinearDiscriminant,
    LogisticRegression,
    QuadraticDiscriminant,
    RidgeClassifier,
    SGDHinge,
)
from .preprocess import ONEHOT, ORDINAL, Preprocessor
from .trees import DecisionTree, RandomForest

MODEL_LABELS = ("NB", "KN", "DT", "RF", "LR", "RC", "SGD", "LDA", "QDA")

# frozen defaults; recorded with every result file
DEFAULT_HYPERPARAMETERS: dict[str, dict] = {
    "NB": {"var_smoothing": 1e-9},
    "KN": {"n_neighbors": 5},
    "DT": {"max_depth": 12, "min_samples_leaf": 1},
    "RF": {"n_estimators": 100, "max_features": "sqrt", "max_depth": None, "min_samples_leaf": 1, "bootstrap": True},
    "LR": {"l2": 1e-4, "n_iter": 500, "init_scale": 0.01},
    "RC": {"alpha": 1.0},
    "SGD": {"learning_rate": 0.01, "n_epochs": 5, "alpha": 1e-4},
    "LDA": {"ridge": 1e-6},
    "QDA": {"ridge": 1e-6},
}

_ESTIMATORS = {
    "NB": GaussianNB,
    "KN": KNeighbors,
    "DT": DecisionTree,
    "RF": RandomForest,
    "LR": LogisticRegression,
    "RC": RidgeClassifier,
    "SGD": SGDHinge,
    "LDA": LinearDiscriminant,
    "QDA": QuadraticDiscriminant,
}

# (categorical encoding, standardise numeric inputs)
_PREPROCESSING = {
    "NB": (ONEHOT, False),
    "KN": (ORDINAL, False),
    "DT": (ORDINAL, False),
    "RF": (ORDINAL, False),
    "LR": (ONEHOT, True),
    "RC": (ONEHOT, True),
    "SGD": (ONEHOT, True),
    "LDA": (ONEHOT, True),
    "QDA": (ONEHOT, True),
}


@dataclass(frozen=True)
class ModelSpec:
    label: str
    hyperparameters: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.label not in MODEL_LABELS:
            raise ValueError(f"unknown model label {self.label!r}; choose from {MODEL_LABELS}")
        merged = dict(DEFAULT_HYPERPARAMETERS[self.label])
        unknown = set(self.hyperparameters) - set(merged)
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.label}: {sorted(unknown)}")
        merged.update(self.hyperparameters)
        object.__setattr__(self, "hyperparameters", merged)

    def __hash__(self):
        return hash((self.label, tuple(sorted((k, repr(v)) for k, v in self.hyperparameters.items()))))

    def build(self):
        return _ESTIMATORS[self.label](**self.hyperparameters)

    def to_json(self) -> dict:
        return {"label": self.label, "hyperparameters": dict(self.hyperparameters)}

    @classmethod
    def from_json(cls, obj) -> "ModelSpec":
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj["label"], obj.get("hyperparameters", {}))


@dataclass(frozen=True)
class PerfMetric:
    tag: str = "f1"
    positive_class: str | None = None

    def __post_init__(self):
        if self.tag not in ("f1", "accuracy"):
            raise ValueError(f"unknown metric {self.tag!r}")

    def positive_code(self, d: Dataset) -> int:
        cats = d.target_schema.categories
        if self.positive_class is None:
            return 1
        if self.positive_class not in cats:
            raise ValueError(f"positive class {self.positive_class!r} not among {cats}")
        return cats.index(self.positive_class)

    def to_json(self) -> dict:
        out = {"tag": self.tag}
        if self.positive_class is not None:
            out["positive_class"] = self.positive_class
        return out

    @classmethod
    def from_json(cls, obj) -> "PerfMetric":
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj.get("tag", "f1"), obj.get("positive_class"))


class FittedModel:
    def __init__(self, spec: ModelSpec, preprocessor: Preprocessor, estimator, categories):
        self.spec = spec
        self.preprocessor = preprocessor
        self.estimator = estimator
        self.categories = categories

    def __repr__(self):
        return f"FittedModel({self.spec.label})"


def _labelled_rows(d: Dataset):
    y = d.target_codes()
    keep = ~np.isnan(y)
    return keep, y[keep].astype(np.int64)


def fit(spec: ModelSpec, train: Dataset, seed: int) -> FittedModel:
    """Fit ``spec`` on ``train``; rows with a null target are ignored."""
    if isinstance(spec, str):
        spec = ModelSpec(spec)
    keep, y = _labelled_rows(train)
    if len(np.unique(y)) < 2:
        raise DegenerateTraining(f"{spec.label}: training data holds a single class")
    encoding, scale = _PREPROCESSING[spec.label]
    kept = train if keep.all() else train.take(np.flatnonzero(keep))
    pre = Preprocessor(encoding, scale).fit(kept)
    X = pre.transform(kept)
    rng = np.random.default_rng(seed)
    est = spec.build().fit(X, y, rng)
    return FittedModel(spec, pre, est, train.target_schema.categories)


def predict(m: FittedModel, test: Dataset) -> np.ndarray:
    """Predicted target category indices, one per row of ``test``."""
    X = m.preprocessor.transform(test)
    if len(X) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.asarray(m.estimator.predict(X), dtype=np.int64)


def predict_labels(m: FittedModel, test: Dataset) -> list[str]:
    return [m.categories[k] for k in predict(m, test)]


def f1_score(y_true, y_pred, positive: int = 1) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(np.sum((y_pred == positive) & (y_true == positive)))
    fp = int(np.sum((y_pred == positive) & (y_true != positive)))
    fn = int(np.sum((y_pred != positive) & (y_true == positive)))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def accuracy(y_true, y_pred) -> float:
    return float(np.mean(np.asarray(y_true) == np.asarray(y_pred)))


def performance(m: FittedModel, test: Dataset, metric: PerfMetric | None = None) -> float:
    metric = metric or PerfMetric()
    keep, y = _labelled_rows(test)
    if len(y) == 0:
        raise EmptyTest("test set has no labelled rows")
    labelled = test if keep.all() else test.take(np.flatnonzero(keep))
    pred = predict(m, labelled)
    if metric.tag == "accuracy":
        return accuracy(y, pred)
    return f1_score(y, pred, metric.positive_code(test))


def feature_importance(d: Dataset, seed: int = 0, **rf_params) -> dict[str, float]:
    """Mean impurity decrease of a random forest trained on all of ``d``."""
    m = fit(ModelSpec("RF", rf_params), d, seed)
    scores = m.estimator.feature_importances()
    return dict(zip(m.preprocessor.output_names, (float(s) for s in scores)))
