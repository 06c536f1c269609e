import json
import random

import numpy as np
import pytest

from esprofile import runner
from esprofile.corrupt import CorruptionSpec, ErrorType
from esprofile.errors import IntegrityError, ScenarioNotFound, ValidationFailure
from esprofile.learn import MODEL_LABELS, ModelSpec
from esprofile.runner import (
    ExperimentConfig,
    IncompleteRepetition,
    RunStore,
    collect_curves,
    derive_seed,
    enumerate_scenarios,
    run_experiment,
    scenario_id,
    validate_config,
)
from esprofile.tabular import from_columns, write_csv

from conftest import numeric_table


def config_doc(path, **over):
    doc = {
        "schema_version": 1,
        "dataset": {"path": str(path), "target": "y"},
        "strategies": [{"kind": "custom", "specs": [{"error_type": "missing_values", "features": ["x0"]}]}],
        "models": ["NB"],
        "schedule": [0, 20, 40, 60, 80],
        "repetitions": 2,
        "metric": {"tag": "f1"},
        "master_seed": 0,
    }
    doc.update(over)
    return doc


@pytest.fixture
def csv40(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(numeric_table(40, 3, seed=1, balance=0.4), path)
    return path


def make(path, **over):
    return ExperimentConfig.from_json(config_doc(path, **over))


# -- enumeration -------------------------------------------------------------


def seventeen_features(seed=0):
    rng = np.random.default_rng(seed)
    cols = {}
    for j in range(17):
        cols[f"f{j:02d}"] = rng.normal(size=120)
    cols["f01"] = cols["f00"] + rng.normal(0, 0.05, 120)
    cols["f03"] = cols["f02"] + rng.normal(0, 0.05, 120)
    cols["y"] = rng.random(120) < 0.4
    return from_columns(cols, "y")


def test_scenario_count_combinatorial(tmp_path):
    d0 = seventeen_features()
    write_csv(d0, tmp_path / "d.csv")
    cfg = make(
        tmp_path / "d.csv",
        models=list(MODEL_LABELS),
        strategies=[
            {"kind": "one_feature_at_a_time", "error_types": ["noisy_values", "outliers"], "features": "all"},
            {"kind": "correlated_features", "error_types": ["noisy_values", "outliers"], "threshold": 0.9},
            {
                "kind": "custom",
                "specs": [
                    {"error_type": "mislabeling"},
                    {"error_type": "duplication"},
                    {"error_type": {"tag": "oversampling_class", "target_class": "True"}},
                ],
            },
        ],
    )
    d = cfg.load_dataset()
    scenarios = enumerate_scenarios(cfg, d)
    # (2 x 17 + 2 x 2 + 3) specs x 9 models
    assert len(scenarios) == 369
    assert len({s.id for s in scenarios}) == 369
    assert [s.index for s in scenarios] == list(range(369))
    assert enumerate_scenarios(cfg, d) == scenarios


def test_scenario_count_trivial(csv40):
    cfg = make(csv40)
    d = cfg.load_dataset()
    assert len(enumerate_scenarios(cfg, d)) == 1
    assert enumerate_scenarios(make(csv40, models=[]), d) == []


def test_scenario_id_injective_fuzz():
    rng = random.Random(0)
    tags = ["noisy_values", "outliers", "missing_values"]
    seen = {}
    for _ in range(10_000):
        label = rng.choice(MODEL_LABELS)
        hp = {}
        if label == "KN":
            hp = {"n_neighbors": rng.randint(1, 30)}
        elif label == "DT":
            hp = {"max_depth": rng.randint(1, 30)}
        model = ModelSpec(label, hp)
        feats = tuple(sorted(rng.sample([f"c{i}" for i in range(12)], rng.randint(1, 3))))
        levels = (0,) + tuple(sorted(rng.sample(range(1, 101), rng.randint(1, 4))))
        et = ErrorType(rng.choice(tags))
        spec = CorruptionSpec.from_json({"error_type": et.to_json(), "features": list(feats), "schedule": list(levels)})
        key = json.dumps([model.to_json(), spec.to_json()], sort_keys=True)
        sid = scenario_id(model, spec, "data.csv")
        assert seen.setdefault(sid, key) == key


def test_derive_seed_streams_differ():
    seeds = {derive_seed(0, "abc", n, s) for n in range(1, 4) for s in ("split", "corruption", "model")}
    assert len(seeds) == 9
    assert derive_seed(0, "abc", 1, "split") == derive_seed(0, "abc", 1, "split")
    assert derive_seed(1, "abc", 1, "split") != derive_seed(0, "abc", 1, "split")


# -- validation --------------------------------------------------------------


@pytest.mark.parametrize(
    "change, path",
    [
        ({"repetitions": 0}, "repetitions"),
        ({"schedule": [10, 20]}, "schedule"),
        ({"models": ["SVM"]}, "models/0"),
        ({"metric": {"tag": "auc"}}, "metric/tag"),
        ({"strategies": [{"kind": "correlated_features", "error_types": ["outliers"], "threshold": 1.5}]}, "strategies/0/threshold"),
    ],
)
def test_validation_names_the_field(csv40, change, path):
    with pytest.raises(ValidationFailure) as info:
        validate_config(config_doc(csv40, **change))
    assert info.value.path == path


def test_config_round_trip(csv40):
    cfg = make(csv40, alpha=0.01)
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    assert cfg.digest() == ExperimentConfig.from_json(json.loads(cfg.to_json_text())).digest()


# -- execution ---------------------------------------------------------------


def test_counting_contract(csv40, tmp_path):
    store = run_experiment(make(csv40), tmp_path / "out")
    assert len(store.records) == 2
    for rec in store.records.values():
        assert [lv.e for lv in rec.levels] == [0, 20, 40, 60, 80]
        # cell corruption never changes the training size
        assert len({lv.n_train for lv in rec.levels}) == 1
    lines = (tmp_path / "out" / "runs.jsonl").read_text().splitlines()
    assert len(lines) == 2


def test_train_only_corruption(csv40, tmp_path):
    store = run_experiment(make(csv40, repetitions=3), tmp_path / "out")
    for rec in store.records.values():
        assert all(lv.test_checksum == rec.test_checksum for lv in rec.levels)
        assert len({lv.trace for lv in rec.levels}) == 5


def test_rerun_does_no_work(csv40, tmp_path):
    cfg = make(csv40)
    first = run_experiment(cfg, tmp_path / "out")
    calls = []
    again = run_experiment(cfg, tmp_path / "out", progress=lambda s, n: calls.append(n))
    assert calls == []
    assert again.digest() == first.digest()


def test_resume_after_partial_run(csv40, tmp_path):
    cfg = make(csv40, repetitions=3)
    full = run_experiment(cfg, tmp_path / "full")
    # simulate an interrupted run: keep one record and a torn line
    part = tmp_path / "part"
    run_experiment(cfg, part)
    lines = (part / "runs.jsonl").read_text().splitlines()
    (part / "runs.jsonl").write_text(lines[0] + "\n" + lines[1][:20])
    with pytest.warns(UserWarning):
        resumed = run_experiment(cfg, part)
    assert resumed.digest() == full.digest()


def test_worker_count_does_not_change_store(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(numeric_table(60, 3, seed=2, balance=0.4), path)
    cfg = make(
        path,
        models=["NB", "DT"],
        repetitions=4,
        strategies=[{"kind": "one_feature_at_a_time", "error_types": ["noisy_values"], "features": ["x0", "x1"]}],
    )
    run_experiment(cfg, tmp_path / "w1", workers=1)
    run_experiment(cfg, tmp_path / "w8", workers=8)
    a = (tmp_path / "w1" / "runs.jsonl").read_bytes()
    b = (tmp_path / "w8" / "runs.jsonl").read_bytes()
    assert a == b and len(a.splitlines()) == 16
    assert (tmp_path / "w1" / "manifest.json").read_bytes() == (tmp_path / "w8" / "manifest.json").read_bytes()


def test_master_seed_changes_store(csv40, tmp_path):
    a = run_experiment(make(csv40, master_seed=0), tmp_path / "a")
    b = run_experiment(make(csv40, master_seed=1), tmp_path / "b")
    assert a.digest() != b.digest()
    split_a = {r.split_seed for r in a.records.values()}
    split_b = {r.split_seed for r in b.records.values()}
    assert not split_a & split_b


def test_store_refuses_other_config(csv40, tmp_path):
    run_experiment(make(csv40), tmp_path / "out")
    with pytest.raises(ValidationFailure):
        run_experiment(make(csv40, master_seed=5), tmp_path / "out")
    with pytest.raises(ValidationFailure):
        run_experiment(make(csv40), tmp_path / "out", resume=False)


class DriftingTest:
    """Test partition stand-in whose bytes change after the split."""

    def __init__(self, real):
        self.real = real
        self.calls = 0

    def checksum(self):
        self.calls += 1
        return self.real.checksum() if self.calls == 1 else "tampered"


def test_integrity_error_on_test_tampering(csv40, tmp_path, monkeypatch):
    real_split = runner.stratified_split

    def split(d, ratio, seed):
        sp = real_split(d, ratio, seed)
        return type(sp)(sp.train, DriftingTest(sp.test), sp.seed, sp.ratio)

    monkeypatch.setattr(runner, "stratified_split", split)
    with pytest.raises(IntegrityError):
        run_experiment(make(csv40, repetitions=1), tmp_path / "out")


# -- collection --------------------------------------------------------------


def test_collect_curves(csv40, tmp_path):
    store = run_experiment(make(csv40, repetitions=3), tmp_path / "out")
    sid = store.scenarios[0].id
    curves = collect_curves(store, sid)
    assert len(curves) == 3 and all(len(c.p) == 5 for c in curves)
    assert [c.run_seed for c in curves] == [1, 2, 3]
    with pytest.raises(ScenarioNotFound):
        collect_curves(store, "0" * 16)


def test_incomplete_repetition_excluded(csv40, tmp_path):
    run_experiment(make(csv40, repetitions=3), tmp_path / "out")
    runs = tmp_path / "out" / "runs.jsonl"
    docs = [json.loads(line) for line in runs.read_text().splitlines()]
    docs[1]["levels"] = docs[1]["levels"][:-1]
    runs.write_text("".join(json.dumps(d) + "\n" for d in docs))
    store = RunStore.open(tmp_path / "out")
    with pytest.warns(IncompleteRepetition):
        curves = collect_curves(store, store.scenarios[0].id)
    assert [c.run_seed for c in curves] == [1, 3]
