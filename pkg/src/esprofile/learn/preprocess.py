"""Train-only preprocessing: simple imputation, categorical encoding, scaling."""

from __future__ import annotations

import numpy as np

from ..errors import SchemaMismatch
from ..tabular import NUMERIC, Dataset

ONEHOT = "onehot"
ORDINAL = "ordinal"
UNKNOWN_CODE = -1.0


class Preprocessor:
    """Turns a Dataset into a dense design matrix.

    Numeric nulls take the training mean, categorical nulls the training
    mode. Categorical features are either one-hot encoded over the
    categories seen in training (unseen categories become an all-zero
    block) or kept as ordinal codes (unseen categories map to -1).
    Statistics are computed from the training data passed to :meth:`fit`
    and never updated afterwards.
    """

    def __init__(self, encoding: str = ONEHOT, scale: bool = False):
        if encoding not in (ONEHOT, ORDINAL):
            raise ValueError(f"unknown encoding {encoding!r}")
        self.encoding = encoding
        self.scale = scale

    def fit(self, train: Dataset) -> "Preprocessor":
        self.features = [c for c in train.schema if c.name != train.target]
        self.fill = {}
        self.seen = {}
        for col in self.features:
            cells = train.column(col.name)
            present = cells[~np.isnan(cells)]
            if col.kind == NUMERIC:
                self.fill[col.name] = float(present.mean()) if len(present) else 0.0
            else:
                counts = np.bincount(present.astype(np.int64), minlength=len(col.categories))
                self.fill[col.name] = float(np.argmax(counts))
                seen = np.flatnonzero(counts)
                self.seen[col.name] = seen if len(seen) else np.array([int(np.argmax(counts))])
        self.output_names = []
        for col in self.features:
            if col.kind != NUMERIC and self.encoding == ONEHOT:
                self.output_names += [f"{col.name}={col.categories[k]}" for k in self.seen[col.name]]
            else:
                self.output_names.append(col.name)
        self.mean_ = None
        self.std_ = None
        if self.scale:
            X = self._encode(train)
            self.mean_ = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
            std = X.std(axis=0) if len(X) else np.ones(X.shape[1])
            self.std_ = np.where(std > 0, std, 1.0)
        return self

    def _check(self, d: Dataset) -> None:
        for col in self.features:
            if not d.has_column(col.name):
                raise SchemaMismatch(f"column {col.name!r} missing from input")
            if d.column_schema(col.name) != col:
                raise SchemaMismatch(f"column {col.name!r} has a different type or category set")

    def _encode(self, d: Dataset) -> np.ndarray:
        self._check(d)
        blocks = []
        for col in self.features:
            cells = np.array(d.column(col.name))
            cells[np.isnan(cells)] = self.fill[col.name]
            if col.kind == NUMERIC:
                blocks.append(cells[:, None])
                continue
            seen = self.seen[col.name]
            if self.encoding == ONEHOT:
                blocks.append((cells[:, None] == seen[None, :]).astype(np.float64))
            else:
                known = np.isin(cells, seen)
                blocks.append(np.where(known, cells, UNKNOWN_CODE)[:, None])
        if not blocks:
            return np.zeros((d.n_rows, 0))
        return np.hstack(blocks)

    def transform(self, d: Dataset) -> np.ndarray:
        X = self._encode(d)
        if self.scale:
            X = (X - self.mean_) / self.std_
        return X
