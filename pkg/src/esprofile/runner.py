"""Experiment configuration, scenario enumeration and the seeded run loop.

A run store is a directory holding

``manifest.json``
    config, config digest, code version, scenario catalogue and the frozen
    model hyperparameters;
``runs.jsonl``
    one RunRecord per line, rewritten in canonical order when a run
    finishes;
``timings.jsonl``
    wall-clock seconds per (scenario, repetition). Kept apart from
    ``runs.jsonl`` so that the latter is a pure function of the config.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import jsonschema
from threadpoolctl import threadpool_limits

from . import __version__
from .corrupt import (
    CorruptionSpec,
    ErrorType,
    SeveritySchedule,
    corrupt,
    correlated_features,
    one_feature_at_a_time,
)
from .errors import IntegrityError, ScenarioNotFound, ValidationFailure
from .esp import ErrorPerformanceCurve
from .learn import MODEL_LABELS, ModelSpec, PerfMetric, fit, performance
from .tabular import Dataset, load_csv, stratified_split

SCHEMA_VERSION = 1

_ERROR_TYPE = {
    "oneOf": [
        {"enum": ["noisy_values", "outliers", "missing_values", "mislabeling", "duplication"]},
        {
            "type": "object",
            "required": ["tag"],
            "properties": {
                "tag": {
                    "enum": [
                        "noisy_values",
                        "outliers",
                        "missing_values",
                        "mislabeling",
                        "duplication",
                        "oversampling_class",
                    ]
                },
                "noise_scale": {"type": "number", "exclusiveMinimum": 0},
                "outlier_range": {
                    "type": "array",
                    "items": {"type": "number", "minimum": 0},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "target_class": {"type": "string"},
            },
            "additionalProperties": False,
        },
    ]
}

_CONDITION = {
    "type": "object",
    "required": ["column", "op", "value"],
    "properties": {
        "column": {"type": "string"},
        "op": {"enum": ["==", "!=", "<", "<=", ">", ">="]},
        "value": {"type": ["number", "string"]},
    },
    "additionalProperties": False,
}

_SPEC = {
    "type": "object",
    "required": ["error_type"],
    "properties": {
        "error_type": _ERROR_TYPE,
        "features": {"type": "array", "items": {"type": "string"}},
        "schedule": {"$ref": "#/$defs/schedule"},
        "predicate": {"type": "array", "items": _CONDITION},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "esprofile experiment configuration",
    "type": "object",
    "required": ["schema_version", "dataset", "strategies", "models", "schedule", "repetitions", "metric", "master_seed"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "dataset": {
            "type": "object",
            "required": ["path", "target"],
            "properties": {
                "path": {"type": "string", "minLength": 1},
                "target": {"type": "string", "minLength": 1},
                "schema_hints": {
                    "type": "object",
                    "additionalProperties": {"enum": ["numeric", "categorical", "boolean"]},
                },
            },
            "additionalProperties": False,
        },
        "strategies": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {"kind": {"enum": ["one_feature_at_a_time", "correlated_features", "custom"]}},
                # dispatch on kind so that errors name the offending field
                "allOf": [
                    {
                        "if": {"properties": {"kind": {"const": "one_feature_at_a_time"}}},
                        "then": {
                            "required": ["error_types"],
                            "properties": {
                                "kind": True,
                                "error_types": {"type": "array", "items": _ERROR_TYPE, "minItems": 1},
                                "features": {
                                    "oneOf": [
                                        {"const": "all"},
                                        {"type": "array", "items": {"type": "string"}, "minItems": 1},
                                    ]
                                },
                            },
                            "additionalProperties": False,
                        },
                    },
                    {
                        "if": {"properties": {"kind": {"const": "correlated_features"}}},
                        "then": {
                            "required": ["error_types", "threshold"],
                            "properties": {
                                "kind": True,
                                "error_types": {"type": "array", "items": _ERROR_TYPE, "minItems": 1},
                                "threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                            },
                            "additionalProperties": False,
                        },
                    },
                    {
                        "if": {"properties": {"kind": {"const": "custom"}}},
                        "then": {
                            "required": ["specs"],
                            "properties": {
                                "kind": True,
                                "specs": {"type": "array", "items": _SPEC, "minItems": 1},
                            },
                            "additionalProperties": False,
                        },
                    },
                ],
            },
        },
        "models": {
            "type": "array",
            "items": {
                "oneOf": [
                    {"enum": list(MODEL_LABELS)},
                    {
                        "type": "object",
                        "required": ["label"],
                        "properties": {
                            "label": {"enum": list(MODEL_LABELS)},
                            "hyperparameters": {"type": "object"},
                        },
                        "additionalProperties": False,
                    },
                ]
            },
        },
        "schedule": {"$ref": "#/$defs/schedule"},
        "repetitions": {"type": "integer", "minimum": 1},
        "metric": {
            "type": "object",
            "required": ["tag"],
            "properties": {
                "tag": {"enum": ["f1", "accuracy"]},
                "positive_class": {"type": ["string", "null"]},
            },
            "additionalProperties": False,
        },
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "split_ratio": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "output_dir": {"type": "string"},
    },
    "additionalProperties": False,
    "$defs": {
        "schedule": {
            "type": "array",
            "items": {"type": "number", "minimum": 0, "maximum": 100},
            "minItems": 2,
        }
    },
}


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def validate_config(doc: dict) -> None:
    """Raise :class:`ValidationFailure` naming the offending field path."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = "/".join(str(p) for p in err.absolute_path)
        raise ValidationFailure(err.message, path or "<root>")
    try:
        SeveritySchedule(tuple(doc["schedule"]))
    except Exception as exc:
        raise ValidationFailure(str(exc), "schedule") from None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str
    target: str
    strategies: tuple
    models: tuple[ModelSpec, ...]
    schedule: SeveritySchedule = field(default_factory=SeveritySchedule)
    repetitions: int = 30
    metric: PerfMetric = field(default_factory=PerfMetric)
    master_seed: int = 0
    schema_hints: dict = field(default_factory=dict)
    split_ratio: float = 0.8
    alpha: float = 0.05
    delta: float = 0.05
    output_dir: str = "esp-runs"

    def to_json(self) -> dict:
        dataset = {"path": self.dataset_path, "target": self.target}
        if self.schema_hints:
            dataset["schema_hints"] = dict(self.schema_hints)
        return {
            "schema_version": SCHEMA_VERSION,
            "dataset": dataset,
            "strategies": [json.loads(json.dumps(s)) for s in self.strategies],
            "models": [m.to_json() for m in self.models],
            "schedule": list(self.schedule.levels),
            "repetitions": self.repetitions,
            "metric": self.metric.to_json(),
            "master_seed": self.master_seed,
            "split_ratio": self.split_ratio,
            "alpha": self.alpha,
            "delta": self.delta,
            "output_dir": self.output_dir,
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(_canonical(self.to_json()).encode()).hexdigest()

    @classmethod
    def from_json(cls, doc: dict) -> "ExperimentConfig":
        validate_config(doc)
        ds = doc["dataset"]
        return cls(
            dataset_path=ds["path"],
            target=ds["target"],
            schema_hints=dict(ds.get("schema_hints", {})),
            strategies=tuple(doc["strategies"]),
            models=tuple(ModelSpec.from_json(m) for m in doc["models"]),
            schedule=SeveritySchedule(tuple(doc["schedule"])),
            repetitions=doc["repetitions"],
            metric=PerfMetric.from_json(doc["metric"]),
            master_seed=doc["master_seed"],
            split_ratio=doc.get("split_ratio", 0.8),
            alpha=doc.get("alpha", 0.05),
            delta=doc.get("delta", 0.05),
            output_dir=doc.get("output_dir", "esp-runs"),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationFailure(f"config is not valid JSON: {exc}") from None
        cfg = cls.from_json(doc)
        ds = Path(cfg.dataset_path)
        if not ds.is_absolute():
            # dataset paths are relative to the config file
            object.__setattr__(cfg, "dataset_path", str((path.parent / ds).resolve()))
        return cfg

    def load_dataset(self) -> Dataset:
        return load_csv(self.dataset_path, self.target, self.schema_hints or None)


@dataclass(frozen=True)
class Scenario:
    id: str
    model: ModelSpec
    corruption: CorruptionSpec
    dataset_ref: str
    index: int = 0

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "index": self.index,
            "model": self.model.to_json(),
            "corruption": self.corruption.to_json(),
            "dataset": self.dataset_ref,
        }

    @classmethod
    def from_json(cls, obj) -> "Scenario":
        return cls(
            obj["id"],
            ModelSpec.from_json(obj["model"]),
            CorruptionSpec.from_json(obj["corruption"]),
            obj["dataset"],
            obj.get("index", 0),
        )


def scenario_id(model: ModelSpec, spec: CorruptionSpec, dataset_ref: str) -> str:
    payload = _canonical({"model": model.to_json(), "corruption": spec.to_json(), "dataset": dataset_ref})
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def resolve_specs(config: ExperimentConfig, d0: Dataset) -> list[CorruptionSpec]:
    """Expand every strategy block into concrete corruption specs."""
    specs: list[CorruptionSpec] = []
    for block in config.strategies:
        kind = block["kind"]
        ets = [ErrorType.from_json(e) for e in block.get("error_types", ())]
        if kind == "one_feature_at_a_time":
            feats = block.get("features", "all")
            if feats == "all":
                feats = d0.feature_names
            specs.extend(one_feature_at_a_time(d0, ets, feats, config.schedule))
        elif kind == "correlated_features":
            specs.extend(correlated_features(d0, ets, block["threshold"], config.schedule))
        else:
            for raw in block["specs"]:
                spec = CorruptionSpec.from_json({**raw, "schedule": raw.get("schedule", list(config.schedule.levels))})
                spec.validate(d0)
                specs.append(spec)
    return specs


def enumerate_scenarios(config: ExperimentConfig, d0: Dataset) -> list[Scenario]:
    """Cartesian product specs x models, spec major; repeated pairs collapse."""
    ref = d0.provenance
    out, seen = [], set()
    for spec in resolve_specs(config, d0):
        for model in config.models:
            sid = scenario_id(model, spec, ref)
            if sid in seen:
                continue
            seen.add(sid)
            out.append(Scenario(sid, model, spec, ref, len(out)))
    return out


def derive_seed(master_seed: int, sid: str, repetition: int, stream: str) -> int:
    """Counter-based 64-bit seed for one (scenario, repetition, purpose) cell."""
    msg = f"{master_seed}:{sid}:{repetition}:{stream}".encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class LevelResult:
    e: float
    p: float
    trace: str
    test_checksum: str
    n_train: int


@dataclass(frozen=True)
class RunRecord:
    scenario_id: str
    repetition: int
    master_seed: int
    split_seed: int
    corruption_seed: int
    model_seed: int
    test_checksum: str
    levels: tuple[LevelResult, ...]
    duration: float = 0.0

    def to_json(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "repetition": self.repetition,
            "master_seed": self.master_seed,
            "split_seed": self.split_seed,
            "corruption_seed": self.corruption_seed,
            "model_seed": self.model_seed,
            "test_checksum": self.test_checksum,
            "levels": [
                {"e": lv.e, "p": lv.p, "trace": lv.trace, "test_checksum": lv.test_checksum, "n_train": lv.n_train}
                for lv in self.levels
            ],
        }

    @classmethod
    def from_json(cls, obj, duration: float = 0.0) -> "RunRecord":
        return cls(
            obj["scenario_id"],
            obj["repetition"],
            obj["master_seed"],
            obj["split_seed"],
            obj["corruption_seed"],
            obj["model_seed"],
            obj["test_checksum"],
            tuple(LevelResult(**lv) for lv in obj["levels"]),
            duration,
        )


def run_repetition(
    d0: Dataset,
    scenario: Scenario,
    repetition: int,
    master_seed: int,
    metric: PerfMetric,
    split_ratio: float = 0.8,
) -> RunRecord:
    """One repetition: split once, then corrupt-fit-evaluate at every level.

    Only the training partition is ever handed to :func:`corrupt`; the
    test partition checksum is re-verified before each evaluation.
    """
    start = time.perf_counter()
    sid = scenario.id
    split_seed = derive_seed(master_seed, sid, repetition, "split")
    corruption_seed = derive_seed(master_seed, sid, repetition, "corruption")
    model_seed = derive_seed(master_seed, sid, repetition, "model")
    split = stratified_split(d0, split_ratio, split_seed)
    test = split.test
    checksum = test.checksum()
    levels = []
    for level in scenario.corruption.schedule.levels:
        train_k, trace = corrupt(split.train, scenario.corruption, level, corruption_seed)
        model = fit(scenario.model, train_k, model_seed)
        now = test.checksum()
        if now != checksum:
            raise IntegrityError(f"test partition changed at level {level} of scenario {sid}")
        p = performance(model, test, metric)
        levels.append(LevelResult(float(level), float(p), trace.digest(), now, train_k.n_rows))
    return RunRecord(
        sid,
        repetition,
        master_seed,
        split_seed,
        corruption_seed,
        model_seed,
        checksum,
        tuple(levels),
        time.perf_counter() - start,
    )


# -- run store ---------------------------------------------------------------


class RunStore:
    MANIFEST = "manifest.json"
    RUNS = "runs.jsonl"
    TIMINGS = "timings.jsonl"

    def __init__(self, root, manifest: dict, records: Iterable[RunRecord] = ()):
        self.root = Path(root)
        self.manifest = manifest
        self.records: dict[tuple[str, int], RunRecord] = {}
        for rec in records:
            self.records[(rec.scenario_id, rec.repetition)] = rec

    @property
    def scenarios(self) -> list[Scenario]:
        return [Scenario.from_json(s) for s in self.manifest["scenarios"]]

    def scenario(self, sid: str) -> Scenario:
        for s in self.manifest["scenarios"]:
            if s["id"] == sid:
                return Scenario.from_json(s)
        raise ScenarioNotFound(f"scenario {sid!r} not in store")

    @property
    def config(self) -> ExperimentConfig:
        return ExperimentConfig.from_json(self.manifest["config"])

    @property
    def schedule(self) -> tuple[float, ...]:
        return tuple(float(v) for v in self.manifest["config"]["schedule"])

    def _order(self):
        index = {s["id"]: s["index"] for s in self.manifest["scenarios"]}
        return sorted(self.records.values(), key=lambda r: (index.get(r.scenario_id, 1 << 62), r.scenario_id, r.repetition))

    def canonical_text(self) -> str:
        return "".join(json.dumps(r.to_json(), sort_keys=True) + "\n" for r in self._order())

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def completed(self) -> set[tuple[str, int]]:
        return set(self.records)

    def add(self, rec: RunRecord) -> None:
        self.records[(rec.scenario_id, rec.repetition)] = rec
        with open(self.root / self.RUNS, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
        with open(self.root / self.TIMINGS, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"scenario_id": rec.scenario_id, "repetition": rec.repetition, "seconds": rec.duration}) + "\n")

    def finalize(self) -> None:
        tmp = self.root / (self.RUNS + ".tmp")
        tmp.write_text(self.canonical_text(), encoding="utf-8")
        os.replace(tmp, self.root / self.RUNS)

    def write_manifest(self) -> None:
        (self.root / self.MANIFEST).write_text(json.dumps(self.manifest, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def open(cls, root) -> "RunStore":
        root = Path(root)
        manifest_path = root / cls.MANIFEST
        if not manifest_path.exists():
            raise FileNotFoundError(f"no run store manifest at {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        records = []
        runs = root / cls.RUNS
        if runs.exists():
            for line in runs.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(RunRecord.from_json(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError):
                    # a torn final line from an interrupted run
                    warnings.warn(f"skipping unreadable run record in {runs}", stacklevel=2)
        return cls(root, manifest, records)


def _manifest(config: ExperimentConfig, d0: Dataset, scenarios: list[Scenario]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "config_digest": config.digest(),
        "config": config.to_json(),
        "dataset": {
            "provenance": d0.provenance,
            "checksum": d0.checksum(),
            "n_rows": d0.n_rows,
            "schema": [c.to_json() for c in d0.schema],
            "target": d0.target,
        },
        "hyperparameters": {m.label: m.hyperparameters for m in config.models},
        "scenario_count": len(scenarios),
        "scenarios": [s.to_json() for s in scenarios],
    }


_WORKER_STATE: dict = {}


def _init_worker(d0, master_seed, metric, split_ratio):
    threadpool_limits(1)
    _WORKER_STATE.update(d0=d0, master_seed=master_seed, metric=metric, split_ratio=split_ratio)


def _work(scenario_json, repetition):
    st = _WORKER_STATE
    return run_repetition(
        st["d0"], Scenario.from_json(scenario_json), repetition, st["master_seed"], st["metric"], st["split_ratio"]
    )


def run_experiment(config: ExperimentConfig, out_dir=None, workers: int = 1, resume: bool = True, progress=None) -> RunStore:
    """Execute every (scenario, repetition) cell not already in the store.

    Results do not depend on ``workers`` or on completion order; the store
    is rewritten in canonical order at the end.
    """
    root = Path(out_dir or config.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    d0 = config.load_dataset()
    scenarios = enumerate_scenarios(config, d0)
    manifest = _manifest(config, d0, scenarios)
    if (root / RunStore.MANIFEST).exists():
        store = RunStore.open(root)
        if store.manifest.get("config_digest") != manifest["config_digest"]:
            raise ValidationFailure("existing store was produced by a different config", "config")
        if store.manifest.get("dataset", {}).get("checksum") != manifest["dataset"]["checksum"]:
            raise ValidationFailure("dataset content changed since the store was created", "dataset")
        if not resume:
            raise ValidationFailure(f"store {root} already exists; pass resume=True to continue it", "output_dir")
    else:
        for stale in (RunStore.RUNS, RunStore.TIMINGS):
            (root / stale).unlink(missing_ok=True)
        store = RunStore(root, manifest)
    store.manifest = manifest
    store.write_manifest()
    done = store.completed()
    todo = [(s, n) for s in scenarios for n in range(1, config.repetitions + 1) if (s.id, n) not in done]
    if workers <= 1:
        with threadpool_limits(1):
            for s, n in todo:
                store.add(run_repetition(d0, s, n, config.master_seed, config.metric, config.split_ratio))
                if progress:
                    progress(s, n)
    else:
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(d0, config.master_seed, config.metric, config.split_ratio),
        ) as pool:
            futures = {pool.submit(_work, s.to_json(), n): (s, n) for s, n in todo}
            for fut in as_completed(futures):
                store.add(fut.result())
                if progress:
                    progress(*futures[fut])
    store.finalize()
    return store


class IncompleteRepetition(UserWarning):
    pass


def collect_curves(store: RunStore, sid: str) -> list[ErrorPerformanceCurve]:
    """One curve per complete repetition, in repetition order.

    Repetitions missing any scheduled level are left out with a warning.
    """
    scenario = store.scenario(sid)
    metric = store.config.metric
    levels = tuple(float(v) for v in scenario.corruption.schedule.levels)
    recs = sorted((r for (s, _), r in store.records.items() if s == sid), key=lambda r: r.repetition)
    curves = []
    for rec in recs:
        got = tuple(lv.e for lv in rec.levels)
        if got != levels:
            warnings.warn(
                f"repetition {rec.repetition} of {sid} is incomplete ({len(got)}/{len(levels)} levels); excluded",
                IncompleteRepetition,
                stacklevel=2,
            )
            continue
        curves.append(ErrorPerformanceCurve(got, tuple(lv.p for lv in rec.levels), metric, rec.repetition))
    return curves
