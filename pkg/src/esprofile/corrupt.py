"""Corruption operators and the strategies that enumerate them.

Every operator is a pure function of ``(clean dataset, spec, level, seed)``.
Cells are chosen by consuming one seeded permutation per feature by prefix,
so the cells touched at a lower severity are always a subset of those
touched at a higher one, and they carry the same corrupted values.
"""

from __future__ import annotations

import hashlib
import json
import math
import operator
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyFeatureList,
    FeatureNotFound,
    InvalidCorruptionSpec,
    LevelNotInSchedule,
    OutlierOnCategorical,
    PredicateSelectsNoRows,
)
from .tabular import NUMERIC, Dataset, pearson_matrix, numeric_columns

NOISY_VALUES = "noisy_values"
OUTLIERS = "outliers"
MISSING_VALUES = "missing_values"
MISLABELING = "mislabeling"
DUPLICATION = "duplication"
OVERSAMPLING_CLASS = "oversampling_class"

FEATURE_ERRORS = (NOISY_VALUES, OUTLIERS, MISSING_VALUES)
ROW_ERRORS = (DUPLICATION, OVERSAMPLING_CLASS)
ERROR_TAGS = FEATURE_ERRORS + (MISLABELING,) + ROW_ERRORS

DEFAULT_SCHEDULE = (0, 20, 40, 60, 80)

_OPS = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


@dataclass(frozen=True)
class ErrorType:
    """Error tag plus its parameters.

    ``noise_scale`` multiplies the clean column standard deviation for
    numeric noisy values; ``outlier_range`` bounds the outlier distance in
    standard deviations; ``target_class`` is the class label copied by
    ``oversampling_class``.
    """

    tag: str
    noise_scale: float = 1.0
    outlier_range: tuple[float, float] = (3.0, 5.0)
    target_class: str | None = None

    def __post_init__(self):
        if self.tag not in ERROR_TAGS:
            raise InvalidCorruptionSpec(f"unknown error type {self.tag!r}")
        if self.noise_scale <= 0:
            raise InvalidCorruptionSpec("noise_scale must be positive")
        lo, hi = self.outlier_range
        if not 0 <= lo <= hi:
            raise InvalidCorruptionSpec("outlier_range must satisfy 0 <= low <= high")
        if self.tag == OVERSAMPLING_CLASS and self.target_class is None:
            raise InvalidCorruptionSpec("oversampling_class needs target_class")

    @property
    def needs_features(self) -> bool:
        return self.tag in FEATURE_ERRORS

    @property
    def is_row_error(self) -> bool:
        return self.tag in ROW_ERRORS

    def to_json(self) -> dict:
        out: dict = {"tag": self.tag}
        if self.tag == NOISY_VALUES:
            out["noise_scale"] = self.noise_scale
        elif self.tag == OUTLIERS:
            out["outlier_range"] = list(self.outlier_range)
        elif self.tag == OVERSAMPLING_CLASS:
            out["target_class"] = self.target_class
        return out

    @classmethod
    def from_json(cls, obj) -> "ErrorType":
        if isinstance(obj, str):
            return cls(obj)
        kwargs = {"tag": obj["tag"]}
        if "noise_scale" in obj:
            kwargs["noise_scale"] = float(obj["noise_scale"])
        if "outlier_range" in obj:
            kwargs["outlier_range"] = tuple(float(v) for v in obj["outlier_range"])
        if "target_class" in obj:
            kwargs["target_class"] = str(obj["target_class"])
        return cls(**kwargs)


@dataclass(frozen=True)
class SeveritySchedule:
    levels: tuple[float, ...] = DEFAULT_SCHEDULE

    def __post_init__(self):
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) < 2:
            raise InvalidCorruptionSpec("a schedule needs at least two levels")
        if levels[0] != 0:
            raise InvalidCorruptionSpec("a schedule must start at 0")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise InvalidCorruptionSpec("schedule levels must be strictly increasing")
        if levels[-1] > 100:
            raise InvalidCorruptionSpec("schedule levels must lie in [0, 100]")

    @property
    def max_level(self) -> float:
        return self.levels[-1]

    def __contains__(self, level) -> bool:
        return level in self.levels

    def __iter__(self):
        return iter(self.levels)


@dataclass(frozen=True)
class Condition:
    """One ``column <op> literal`` clause of a row predicate."""

    column: str
    op: str
    value: float | str

    def __post_init__(self):
        if self.op not in _OPS:
            raise InvalidCorruptionSpec(f"unsupported comparator {self.op!r}")

    def mask(self, d: Dataset) -> np.ndarray:
        if not d.has_column(self.column):
            raise FeatureNotFound(f"predicate column {self.column!r} not in dataset")
        col = d.column_schema(self.column)
        cells = d.column(self.column)
        present = ~np.isnan(cells)
        out = np.zeros(d.n_rows, dtype=bool)
        fn = _OPS[self.op]
        if col.kind == NUMERIC:
            try:
                lit = float(self.value)
            except (TypeError, ValueError):
                raise InvalidCorruptionSpec(f"predicate on numeric {self.column!r} needs a number") from None
            out[present] = fn(cells[present], lit)
            return out
        lit = str(self.value)
        hits = np.array([bool(fn(label, lit)) for label in col.categories])
        out[present] = hits[cells[present].astype(np.int64)]
        return out

    def to_json(self) -> dict:
        return {"column": self.column, "op": self.op, "value": self.value}

    @classmethod
    def from_json(cls, obj) -> "Condition":
        return cls(obj["column"], obj["op"], obj["value"])


@dataclass(frozen=True)
class CorruptionSpec:
    error_type: ErrorType
    features: tuple[str, ...] = ()
    schedule: SeveritySchedule = field(default_factory=SeveritySchedule)
    predicate: tuple[Condition, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "predicate", tuple(self.predicate))
        if self.error_type.needs_features and not self.features:
            raise EmptyFeatureList(f"{self.error_type.tag} needs at least one feature")
        if not self.error_type.needs_features and self.features:
            raise InvalidCorruptionSpec(f"{self.error_type.tag} takes no feature list")
        if len(set(self.features)) != len(self.features):
            raise InvalidCorruptionSpec("duplicate features in spec")

    def validate(self, d: Dataset) -> None:
        for name in self.features:
            if not d.has_column(name):
                raise FeatureNotFound(f"feature {name!r} not in dataset")
            if name == d.target:
                raise InvalidCorruptionSpec(f"{self.error_type.tag} cannot target the target column")
            if self.error_type.tag == OUTLIERS and not d.column_schema(name).is_numeric:
                raise OutlierOnCategorical(f"outliers need a numeric feature, {name!r} is {d.column_schema(name).kind}")
        for cond in self.predicate:
            cond.mask(d)
        if self.error_type.tag == OVERSAMPLING_CLASS:
            if self.error_type.target_class not in d.target_schema.categories:
                raise InvalidCorruptionSpec(
                    f"class {self.error_type.target_class!r} not among {d.target_schema.categories}"
                )

    def eligible_rows(self, d: Dataset) -> np.ndarray:
        mask = np.ones(d.n_rows, dtype=bool)
        for cond in self.predicate:
            mask &= cond.mask(d)
        return mask

    def label(self) -> str:
        feats = "+".join(self.features) if self.features else "-"
        return f"{self.error_type.tag}[{feats}]"

    def to_json(self) -> dict:
        out = {
            "error_type": self.error_type.to_json(),
            "features": list(self.features),
            "schedule": list(self.schedule.levels),
        }
        if self.predicate:
            out["predicate"] = [c.to_json() for c in self.predicate]
        return out

    @classmethod
    def from_json(cls, obj, schedule: SeveritySchedule | None = None) -> "CorruptionSpec":
        if "schedule" in obj:
            schedule = SeveritySchedule(tuple(obj["schedule"]))
        return cls(
            ErrorType.from_json(obj["error_type"]),
            tuple(obj.get("features", ())),
            schedule or SeveritySchedule(),
            tuple(Condition.from_json(c) for c in obj.get("predicate", ())),
        )


@dataclass(frozen=True)
class CorruptionTrace:
    level: float
    seed: int
    touched_cells: tuple[tuple[int, str], ...] = ()
    added_rows: int = 0
    added_sources: tuple[int, ...] = ()

    def digest(self) -> str:
        payload = json.dumps(
            {
                "level": self.level,
                "seed": self.seed,
                "cells": [list(c) for c in self.touched_cells],
                "added": self.added_rows,
                "sources": list(self.added_sources),
            },
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode()).hexdigest()


def _count(level, n: int) -> int:
    # exact rational arithmetic: 0.2 * 50 must give 10, not 9
    lv = Fraction(repr(float(level))) if isinstance(level, float) else Fraction(level)
    return math.floor(lv * n / 100)


def _column_stats(cells: np.ndarray) -> tuple[float, float]:
    present = cells[~np.isnan(cells)]
    if len(present) == 0:
        return 0.0, 1.0
    std = float(present.std())
    return float(present.mean()), std if std > 0 else 1.0


def _stream(seed: int, k: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), k])


def corrupt(d0: Dataset, spec: CorruptionSpec, level, seed: int) -> tuple[Dataset, CorruptionTrace]:
    """Apply ``spec`` at severity ``level`` (a percentage) to ``d0``.

    Returns the corrupted copy and a trace of what was touched. ``d0`` is
    never modified. Level 0 returns ``d0`` itself with an empty trace.
    """
    if level not in spec.schedule:
        raise LevelNotInSchedule(f"level {level} not in schedule {list(spec.schedule.levels)}")
    spec.validate(d0)
    if level == 0:
        return d0, CorruptionTrace(level, seed)
    eligible = spec.eligible_rows(d0)
    if spec.predicate and not eligible.any():
        raise PredicateSelectsNoRows(f"predicate of {spec.label()} selects no rows")
    if spec.error_type.is_row_error:
        return _corrupt_rows(d0, spec, level, seed, eligible)
    return _corrupt_cells(d0, spec, level, seed, eligible)


def _corrupt_cells(d0, spec, level, seed, eligible):
    et = spec.error_type
    values = np.array(d0.values)
    touched: list[tuple[int, str]] = []
    targets = [d0.target] if et.tag == MISLABELING else list(spec.features)
    for k, name in enumerate(targets):
        j = d0.column_index(name)
        col = d0.schema[j]
        clean = d0.values[:, j]
        pool = np.flatnonzero(eligible & ~np.isnan(clean))
        if len(pool) == 0:
            raise PredicateSelectsNoRows(f"no eligible non-null cells in {name!r}")
        rng = _stream(seed, k)
        perm = rng.permutation(pool)
        count = _count(level, len(pool))
        rows = perm[:count]
        if et.tag == MISSING_VALUES:
            values[rows, j] = np.nan
        elif et.tag == MISLABELING:
            values[rows, j] = 1.0 - clean[rows]
        elif et.tag == NOISY_VALUES and col.kind == NUMERIC:
            _, std = _column_stats(clean)
            z = rng.standard_normal(len(perm))[:count]
            values[rows, j] = clean[rows] + z * et.noise_scale * std
        elif et.tag == NOISY_VALUES:
            n_cat = len(col.categories)
            if n_cat < 2:
                raise InvalidCorruptionSpec(f"cannot draw a different category for single-category {name!r}")
            offset = rng.integers(1, n_cat, size=len(perm))[:count]
            values[rows, j] = (clean[rows] + offset) % n_cat
        elif et.tag == OUTLIERS:
            mean, std = _column_stats(clean)
            lo, hi = et.outlier_range
            u = rng.uniform(lo, hi, size=len(perm))[:count]
            sign = np.where(rng.random(len(perm))[:count] < 0.5, -1.0, 1.0)
            values[rows, j] = mean + sign * u * std
        touched.extend((int(d0.row_ids[r]), name) for r in rows)
    return d0.replace(values=values), CorruptionTrace(level, seed, tuple(touched))


def _corrupt_rows(d0, spec, level, seed, eligible):
    et = spec.error_type
    pool = eligible
    if et.tag == OVERSAMPLING_CLASS:
        code = d0.target_schema.categories.index(et.target_class)
        pool = pool & (d0.target_codes() == code)
    pool = np.flatnonzero(pool)
    if len(pool) == 0:
        raise PredicateSelectsNoRows(f"{spec.label()} has no rows to copy")
    n = d0.n_rows
    rng = _stream(seed, 0)
    picks = pool[rng.integers(0, len(pool), size=n)]
    added = _count(level, n)
    src = picks[:added]
    values = np.vstack([d0.values, d0.values[src]])
    row_ids = np.concatenate([d0.row_ids, d0.row_ids[src]])
    trace = CorruptionTrace(level, seed, (), added, tuple(int(r) for r in d0.row_ids[src]))
    return d0.replace(values=values, row_ids=row_ids), trace


# -- strategies --------------------------------------------------------------


def _as_error_types(error_types: Iterable) -> list[ErrorType]:
    return [e if isinstance(e, ErrorType) else ErrorType.from_json(e) for e in error_types]


def one_feature_at_a_time(
    d0: Dataset,
    error_types: Sequence,
    features: Sequence[str],
    schedule: SeveritySchedule | None = None,
) -> list[CorruptionSpec]:
    """One spec per (error type, feature), error type major.

    Outlier specs on non-numeric features are skipped with a warning.
    """
    schedule = schedule or SeveritySchedule()
    if not features:
        raise EmptyFeatureList("one-feature-at-a-time needs at least one feature")
    ets = _as_error_types(error_types)
    for name in features:
        if not d0.has_column(name):
            raise FeatureNotFound(f"feature {name!r} not in dataset")
        if name == d0.target:
            raise InvalidCorruptionSpec("the target column is not a feature")
    specs = []
    for et in ets:
        if not et.needs_features:
            raise InvalidCorruptionSpec(f"{et.tag} is not a feature-level error")
        for name in features:
            if et.tag == OUTLIERS and not d0.column_schema(name).is_numeric:
                warnings.warn(f"skipping outliers on non-numeric feature {name!r}", stacklevel=2)
                continue
            specs.append(CorruptionSpec(et, (name,), schedule))
    return specs


def correlated_groups(d0: Dataset, threshold: float) -> list[tuple[str, ...]]:
    """Connected components of size >= 2 of the graph ``|r| >= threshold``."""
    if not 0 < threshold <= 1:
        raise InvalidCorruptionSpec(f"threshold must lie in (0, 1], got {threshold}")
    cm = pearson_matrix(d0, numeric_columns(d0))
    k = len(cm.names)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            if not cm.degenerate[i, j] and abs(cm.r[i, j]) >= threshold:
                parent[find(j)] = find(i)
    comps: dict[int, list[int]] = {}
    for i in range(k):
        comps.setdefault(find(i), []).append(i)
    groups = sorted((sorted(m) for m in comps.values() if len(m) >= 2), key=lambda m: m[0])
    return [tuple(cm.names[i] for i in m) for m in groups]


def correlated_features(
    d0: Dataset,
    error_types: Sequence,
    threshold: float,
    schedule: SeveritySchedule | None = None,
) -> list[CorruptionSpec]:
    """One spec per (error type, correlated feature group), error type major."""
    schedule = schedule or SeveritySchedule()
    ets = _as_error_types(error_types)
    groups = correlated_groups(d0, threshold)
    specs = []
    for et in ets:
        if not et.needs_features:
            raise InvalidCorruptionSpec(f"{et.tag} is not a feature-level error")
        specs.extend(CorruptionSpec(et, g, schedule) for g in groups)
    return specs
