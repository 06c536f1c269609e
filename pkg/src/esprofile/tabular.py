"""Typed tabular data: CSV ingestion, descriptive statistics, stratified splits.

A :class:`Dataset` stores every cell as a float in an ``n x m`` array. Numeric
cells hold their value, categorical and boolean cells hold the category
index, and null cells hold NaN. Arrays are frozen after construction.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    ClassTooSmall,
    EmptyDataset,
    InsufficientNumericColumns,
    MalformedCsv,
    MissingTarget,
    NonBinaryTarget,
    SchemaError,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BOOLEAN = "boolean"
KINDS = (NUMERIC, CATEGORICAL, BOOLEAN)

_TRUE_TOKENS = {"true", "1", "yes"}
_FALSE_TOKENS = {"false", "0", "no"}
BOOLEAN_CATEGORIES = ("False", "True")


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    categories: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r} for {self.name!r}")
        if self.kind == NUMERIC:
            if self.categories is not None:
                raise SchemaError(f"numeric column {self.name!r} cannot carry categories")
            return
        cats = self.categories
        if not cats:
            raise SchemaError(f"column {self.name!r} needs a non-empty category list")
        if len(set(cats)) != len(cats) or list(cats) != sorted(cats):
            raise SchemaError(f"categories of {self.name!r} must be sorted and unique")

    @property
    def is_numeric(self) -> bool:
        return self.kind == NUMERIC

    def to_json(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.categories is not None:
            out["categories"] = list(self.categories)
        return out

    @classmethod
    def from_json(cls, obj: Mapping) -> "ColumnSchema":
        cats = obj.get("categories")
        return cls(obj["name"], obj["kind"], tuple(cats) if cats is not None else None)


class Dataset:
    """Immutable typed table with a designated binary target column.

    Parameters
    ----------
    schema : sequence of ColumnSchema
    target : str
        Name of the target column; must be categorical or boolean with
        exactly two categories.
    values : array_like, shape (n, m)
        Cell grid. NaN marks a null cell.
    row_ids : array_like of int, optional
        Row identities, defaults to ``arange(n)``. Rows appended by
        duplication-style corruption keep the id of the row they copy.
    provenance : str
        Free-text source tag.
    """

    def __init__(self, schema, target, values, row_ids=None, provenance=""):
        self.schema = tuple(schema)
        self.target = target
        values = np.array(values, dtype=np.float64, copy=True)
        if values.ndim != 2:
            raise SchemaError("values must be a 2-D grid")
        if row_ids is None:
            row_ids = np.arange(values.shape[0], dtype=np.int64)
        row_ids = np.array(row_ids, dtype=np.int64, copy=True)
        values.setflags(write=False)
        row_ids.setflags(write=False)
        self.values = values
        self.row_ids = row_ids
        self.provenance = provenance
        self._index = {c.name: i for i, c in enumerate(self.schema)}
        self._validate()

    def _validate(self):
        n, m = self.values.shape
        if len(self._index) != len(self.schema):
            raise SchemaError("column names must be unique")
        if m != len(self.schema):
            raise SchemaError(f"grid has {m} columns but schema lists {len(self.schema)}")
        if m < 2:
            raise SchemaError("dataset needs at least two columns")
        if self.row_ids.shape != (n,):
            raise SchemaError("row_ids length must match the number of rows")
        if self.target not in self._index:
            raise MissingTarget(f"target column {self.target!r} not in schema")
        tcol = self.schema[self._index[self.target]]
        if tcol.kind == NUMERIC or len(tcol.categories) != 2:
            raise NonBinaryTarget(f"target {self.target!r} must be binary categorical/boolean")
        for j, col in enumerate(self.schema):
            if col.kind == NUMERIC:
                continue
            cells = self.values[:, j]
            cells = cells[~np.isnan(cells)]
            bad = (cells != np.floor(cells)) | (cells < 0) | (cells >= len(col.categories))
            if bad.any():
                raise SchemaError(f"column {col.name!r} holds an out-of-range category index")
        num = [j for j, c in enumerate(self.schema) if c.kind == NUMERIC]
        if num and np.isinf(self.values[:, num]).any():
            raise SchemaError("numeric cells must be finite")

    # -- accessors ---------------------------------------------------------

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def column_names(self) -> list[str]:
        return [c.name for c in self.schema]

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.schema if c.name != self.target]

    @property
    def target_index(self) -> int:
        return self._index[self.target]

    @property
    def target_schema(self) -> ColumnSchema:
        return self.schema[self.target_index]

    def column_index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise MissingTarget(f"no column named {name!r}") from None

    def column_schema(self, name: str) -> ColumnSchema:
        return self.schema[self.column_index(name)]

    def has_column(self, name: str) -> bool:
        return name in self._index

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def target_codes(self) -> np.ndarray:
        """Target category indices as floats (NaN for null)."""
        return self.values[:, self.target_index]

    # -- derivation --------------------------------------------------------

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.schema, self.target, self.values[rows], self.row_ids[rows], self.provenance)

    def replace(self, values=None, row_ids=None) -> "Dataset":
        return Dataset(
            self.schema,
            self.target,
            self.values if values is None else values,
            self.row_ids if row_ids is None else row_ids,
            self.provenance,
        )

    def same_schema(self, other: "Dataset") -> bool:
        return self.schema == other.schema and self.target == other.target

    def checksum(self) -> str:
        """SHA-256 over schema, row ids and cell bytes."""
        h = hashlib.sha256()
        h.update(json.dumps([c.to_json() for c in self.schema], sort_keys=True).encode())
        h.update(self.target.encode())
        h.update(np.ascontiguousarray(self.row_ids).tobytes())
        h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()

    def equals(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.same_schema(other)
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values, equal_nan=True)
            and np.array_equal(self.row_ids, other.row_ids)
        )

    __eq__ = equals
    __hash__ = None

    def __repr__(self):
        return f"Dataset(n={self.n_rows}, m={self.n_cols}, target={self.target!r}, provenance={self.provenance!r})"

    def cell_str(self, i: int, j: int) -> str:
        v = self.values[i, j]
        if np.isnan(v):
            return ""
        col = self.schema[j]
        if col.kind == NUMERIC:
            return _format_number(v)
        return col.categories[int(v)]


@dataclass(frozen=True)
class SplitPair:
    train: Dataset
    test: Dataset
    seed: int
    ratio: float


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pairwise Pearson correlations over the numeric columns.

    ``degenerate[i, j]`` is True where either column has zero variance over
    the pairwise-complete rows; those entries are reported as 0.
    """

    names: tuple[str, ...]
    r: np.ndarray
    degenerate: np.ndarray

    def get(self, a: str, b: str) -> float:
        return float(self.r[self.names.index(a), self.names.index(b)])

    def pairs_above(self, threshold: float) -> list[tuple[str, str, float]]:
        out = []
        for i in range(len(self.names)):
            for j in range(i + 1, len(self.names)):
                if abs(self.r[i, j]) >= threshold:
                    out.append((self.names[i], self.names[j], float(self.r[i, j])))
        return out


# -- CSV -------------------------------------------------------------------


def _format_number(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _parse_number(s: str) -> float | None:
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _infer_kind(raw: list[str]) -> str:
    present = [s for s in raw if s != ""]
    if all(_parse_number(s) is not None for s in present):
        return NUMERIC
    tokens = {s.strip().lower() for s in present}
    if tokens <= (_TRUE_TOKENS | _FALSE_TOKENS):
        return BOOLEAN
    return CATEGORICAL


def _encode_column(name: str, kind: str, raw: list[str], col_pos: int):
    out = np.full(len(raw), np.nan)
    if kind == NUMERIC:
        for i, s in enumerate(raw):
            if s == "":
                continue
            v = _parse_number(s)
            if v is None:
                raise MalformedCsv(f"non-numeric value {s!r} in numeric column {name!r}", i + 2, col_pos + 1)
            out[i] = v
        return ColumnSchema(name, NUMERIC), out
    if kind == BOOLEAN:
        for i, s in enumerate(raw):
            if s == "":
                continue
            t = s.strip().lower()
            if t in _TRUE_TOKENS:
                out[i] = 1.0
            elif t in _FALSE_TOKENS:
                out[i] = 0.0
            else:
                raise MalformedCsv(f"non-boolean value {s!r} in boolean column {name!r}", i + 2, col_pos + 1)
        return ColumnSchema(name, BOOLEAN, BOOLEAN_CATEGORIES), out
    cats = tuple(sorted({s for s in raw if s != ""}))
    if not cats:
        raise SchemaError(f"categorical column {name!r} has no non-null values")
    lookup = {c: k for k, c in enumerate(cats)}
    for i, s in enumerate(raw):
        if s != "":
            out[i] = lookup[s]
    return ColumnSchema(name, CATEGORICAL, cats), out


def _build(header: list[str], columns: list[list[str]], target: str, schema_hint, provenance: str) -> Dataset:
    if len(set(header)) != len(header):
        raise MalformedCsv("duplicate column names in header", 1, None)
    if target not in header:
        raise MissingTarget(f"target column {target!r} not found")
    hint = dict(schema_hint or {})
    for k, v in hint.items():
        if k not in header:
            raise SchemaError(f"schema hint names unknown column {k!r}")
        if v not in KINDS:
            raise SchemaError(f"schema hint for {k!r} has unknown kind {v!r}")
    n = len(columns[0]) if columns else 0
    if n == 0:
        raise EmptyDataset("no data rows")
    schema, cols = [], []
    for pos, (name, raw) in enumerate(zip(header, columns)):
        kind = hint.get(name) or _infer_kind(raw)
        if name == target and kind == NUMERIC and name not in hint:
            # numeric 0/1-style targets are read as class labels
            kind = CATEGORICAL
        if name == target:
            distinct = {s.strip().lower() if kind == BOOLEAN else s for s in raw if s != ""}
            if len(distinct) != 2:
                raise NonBinaryTarget(f"target {target!r} has {len(distinct)} distinct non-null values, expected 2")
        col, arr = _encode_column(name, kind, raw, pos)
        schema.append(col)
        cols.append(arr)
    values = np.column_stack(cols)
    return Dataset(schema, target, values, provenance=provenance)


def load_csv(path, target: str, schema_hint: Mapping[str, str] | None = None, provenance: str | None = None) -> Dataset:
    """Read an RFC-4180 CSV file with a header row into a :class:`Dataset`.

    Column kinds are inferred in the order numeric, boolean, categorical
    unless ``schema_hint`` (``{column: kind}``) says otherwise. Empty fields
    become null cells. A target column that would be inferred numeric is
    read as categorical.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        text = fh.read()
    return parse_csv(text, target, schema_hint, provenance if provenance is not None else path.name)


def parse_csv(text: str, target: str, schema_hint=None, provenance: str = "") -> Dataset:
    reader = csv.reader(io.StringIO(text), strict=True)
    try:
        rows = list(reader)
    except csv.Error as exc:
        raise MalformedCsv(f"CSV parse error: {exc}", reader.line_num, None) from None
    if not rows:
        raise EmptyDataset("file has no header row")
    header = rows[0]
    body = rows[1:]
    if body and body[-1] == []:
        body = body[:-1]
    for i, row in enumerate(body):
        if len(row) != len(header):
            raise MalformedCsv(
                f"expected {len(header)} fields, found {len(row)}", i + 2, min(len(row), len(header)) + 1
            )
    if not body:
        raise EmptyDataset("file has a header but no data rows")
    columns = [list(col) for col in zip(*body)]
    return _build(header, columns, target, schema_hint, provenance)


def from_columns(columns: Mapping[str, Sequence], target: str, schema_hint=None, provenance: str = "") -> Dataset:
    """Build a Dataset from in-memory columns, using the same inference as CSV.

    ``None`` and NaN entries become nulls; everything else goes through
    ``str``/``repr`` so that floats round-trip exactly.
    """
    header = list(columns)
    raw_cols = []
    for name in header:
        raw = []
        for v in columns[name]:
            if v is None or (isinstance(v, float) and math.isnan(v)):
                raw.append("")
            elif isinstance(v, (bool, np.bool_)):
                raw.append("True" if v else "False")
            elif isinstance(v, (float, np.floating)):
                raw.append(repr(float(v)))
            else:
                raw.append(str(v))
        raw_cols.append(raw)
    if len({len(c) for c in raw_cols}) > 1:
        raise SchemaError("columns have different lengths")
    return _build(header, raw_cols, target, schema_hint, provenance)


def write_csv(d: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(to_csv_text(d))


def to_csv_text(d: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(d.column_names)
    for i in range(d.n_rows):
        w.writerow([d.cell_str(i, j) for j in range(d.n_cols)])
    return buf.getvalue()


def schema_hint_of(d: Dataset) -> dict[str, str]:
    return {c.name: c.kind for c in d.schema}


# -- descriptive statistics ------------------------------------------------


def _pearson_pair(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    mask = ~(np.isnan(x) | np.isnan(y))
    if mask.sum() < 2:
        return 0.0, True
    x, y = x[mask], y[mask]
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        return 0.0, True
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r)), False


def numeric_columns(d: Dataset, include_target: bool = False) -> list[str]:
    return [c.name for c in d.schema if c.kind == NUMERIC and (include_target or c.name != d.target)]


def pearson_matrix(d: Dataset, columns: Sequence[str] | None = None) -> CorrelationMatrix:
    """Pearson correlation over numeric columns with pairwise null exclusion."""
    names = list(columns) if columns is not None else numeric_columns(d)
    for name in names:
        if not d.column_schema(name).is_numeric:
            raise InsufficientNumericColumns(f"column {name!r} is not numeric")
    if len(names) < 2:
        raise InsufficientNumericColumns(f"need at least 2 numeric columns, have {len(names)}")
    k = len(names)
    r = np.eye(k)
    degenerate = np.zeros((k, k), dtype=bool)
    cols = [d.column(name) for name in names]
    for i in range(k):
        for j in range(i + 1, k):
            rij, deg = _pearson_pair(cols[i], cols[j])
            r[i, j] = r[j, i] = rij
            degenerate[i, j] = degenerate[j, i] = deg
    r.setflags(write=False)
    degenerate.setflags(write=False)
    return CorrelationMatrix(tuple(names), r, degenerate)


def target_correlations(d: Dataset) -> dict[str, float]:
    """Point-biserial correlation of each numeric feature with the target code."""
    y = d.target_codes()
    return {name: _pearson_pair(d.column(name), y)[0] for name in numeric_columns(d)}


def class_balance(d: Dataset) -> dict[str, float]:
    codes = d.target_codes()
    codes = codes[~np.isnan(codes)].astype(np.int64)
    cats = d.target_schema.categories
    counts = np.bincount(codes, minlength=len(cats))
    total = counts.sum()
    return {c: float(counts[k] / total) for k, c in enumerate(cats)}


def _exact_fraction(x) -> Fraction:
    return Fraction(repr(float(x))) if isinstance(x, float) else Fraction(x)


def stratified_split(d: Dataset, ratio: float = 0.8, seed: int = 0) -> SplitPair:
    """Seeded per-class shuffle followed by a prefix split.

    Each class contributes ``floor((1 - ratio) * n_class)`` rows to the
    test side; the remainder goes to train.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    frac_test = 1 - _exact_fraction(ratio)
    codes = d.target_codes()
    rng = np.random.default_rng(seed)
    strata = [np.flatnonzero(codes == k) for k in range(len(d.target_schema.categories))]
    for k, idx in enumerate(strata):
        if len(idx) < 2:
            label = d.target_schema.categories[k]
            raise ClassTooSmall(f"class {label!r} has {len(idx)} rows, need at least 2")
    null_rows = np.flatnonzero(np.isnan(codes))
    if len(null_rows):
        strata.append(null_rows)
    train, test = [], []
    for idx in strata:
        perm = rng.permutation(idx)
        n_test = math.floor(frac_test * len(idx))
        train.append(perm[: len(idx) - n_test])
        test.append(perm[len(idx) - n_test :])
    train_idx = np.sort(np.concatenate(train))
    test_idx = np.sort(np.concatenate(test))
    return SplitPair(d.take(train_idx), d.take(test_idx), seed, ratio)
