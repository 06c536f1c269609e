import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, strategies as st

from esprofile.corrupt import (
    DEFAULT_SCHEDULE,
    DUPLICATION,
    MISLABELING,
    MISSING_VALUES,
    NOISY_VALUES,
    OUTLIERS,
    OVERSAMPLING_CLASS,
    Condition,
    CorruptionSpec,
    ErrorType,
    SeveritySchedule,
    corrupt,
    correlated_features,
    correlated_groups,
    one_feature_at_a_time,
)
from esprofile.errors import (
    EmptyFeatureList,
    FeatureNotFound,
    InsufficientNumericColumns,
    InvalidCorruptionSpec,
    LevelNotInSchedule,
    OutlierOnCategorical,
    PredicateSelectsNoRows,
)
from esprofile.tabular import from_columns

from conftest import numeric_table

CELL_TYPES = (NOISY_VALUES, OUTLIERS, MISSING_VALUES)


def spec(tag, features=(), **kw):
    return CorruptionSpec(ErrorType(tag, **kw), tuple(features))


def touched(trace):
    return set(trace.touched_cells)


def changed_mask(a, b):
    return ~((a == b) | (np.isnan(a) & np.isnan(b)))


def test_schedule_invariants():
    assert SeveritySchedule().levels == (0, 20, 40, 60, 80)
    for bad in [(10, 20), (0, 20, 20), (0, 50, 120), (0,)]:
        with pytest.raises(InvalidCorruptionSpec):
            SeveritySchedule(bad)


def test_error_type_feature_rules():
    with pytest.raises(EmptyFeatureList):
        spec(NOISY_VALUES)
    with pytest.raises(InvalidCorruptionSpec):
        spec(MISLABELING, ["x0"])
    with pytest.raises(InvalidCorruptionSpec):
        ErrorType(OVERSAMPLING_CLASS)


def test_level_zero_is_identity(table50):
    for tag in CELL_TYPES:
        out, tr = corrupt(table50, spec(tag, ["x1"]), 0, 4)
        assert out == table50
        assert tr.touched_cells == () and tr.added_rows == 0


def test_missing_values_count():
    d = numeric_table(100, 2)
    out, tr = corrupt(d, spec(MISSING_VALUES, ["x0"]), 20, 1)
    assert int(np.isnan(out.column("x0")).sum()) == 20
    assert len(tr.touched_cells) == 20


def test_level_not_in_schedule(table50):
    with pytest.raises(LevelNotInSchedule):
        corrupt(table50, spec(MISSING_VALUES, ["x0"]), 30, 0)


def test_validation_errors(mixed):
    with pytest.raises(FeatureNotFound):
        corrupt(mixed, spec(NOISY_VALUES, ["nope"]), 20, 0)
    with pytest.raises(OutlierOnCategorical):
        corrupt(mixed, spec(OUTLIERS, ["city"]), 20, 0)
    pred = CorruptionSpec(ErrorType(MISSING_VALUES), ("age",), predicate=(Condition("age", ">", 1e9),))
    with pytest.raises(PredicateSelectsNoRows):
        corrupt(mixed, pred, 20, 0)


def test_predicate_restricts_rows(mixed):
    cond = Condition("city", "==", "Roma")
    sp = CorruptionSpec(ErrorType(MISSING_VALUES), ("income",), predicate=(cond,))
    out, tr = corrupt(mixed, sp, 40, 3)
    roma = mixed.column("city") == mixed.column_schema("city").categories.index("Roma")
    changed = changed_mask(mixed.column("income"), out.column("income"))
    assert changed.sum() == math.floor(0.4 * roma.sum())
    assert not (changed & ~roma).any()


def test_categorical_noise_changes_category(mixed):
    out, _ = corrupt(mixed, spec(NOISY_VALUES, ["city"]), 80, 7)
    changed = changed_mask(mixed.column("city"), out.column("city"))
    assert changed.sum() == math.floor(0.8 * mixed.n_rows)
    assert set(np.unique(out.column("city"))) <= {0.0, 1.0, 2.0}


def test_outlier_magnitudes(table50):
    out, _ = corrupt(table50, spec(OUTLIERS, ["x2"], outlier_range=(3, 5)), 60, 2)
    clean = table50.column("x2")
    mean, std = clean.mean(), clean.std()
    hit = changed_mask(clean, out.column("x2"))
    z = np.abs(out.column("x2")[hit] - mean) / std
    assert ((z >= 3 - 1e-12) & (z <= 5 + 1e-12)).all()


def test_noise_uses_clean_std(table50):
    sp = spec(NOISY_VALUES, ["x0"], noise_scale=2.0)
    a, _ = corrupt(table50, sp, 80, 5)
    diff = a.column("x0") - table50.column("x0")
    assert np.count_nonzero(diff) == 40
    # heavy scale gives deviations well beyond the clean spread
    assert np.abs(diff).max() > table50.column("x0").std()


def test_mislabeling_flips():
    d = numeric_table(50, 2)
    out, tr = corrupt(d, spec(MISLABELING), 40, 3)
    flipped = d.target_codes() != out.target_codes()
    assert flipped.sum() == 20
    assert len(tr.touched_cells) == 20


def test_oversampling_class_appends_only_that_class():
    d = numeric_table(100, 2, balance=0.3)
    out, tr = corrupt(d, spec(OVERSAMPLING_CLASS, target_class="False"), 20, 9)
    assert out.n_rows == 120 and tr.added_rows == 20
    assert (out.target_codes()[100:] == 0).all()
    # appended rows keep the identity of their source
    for rid, row in zip(out.row_ids[100:], out.values[100:]):
        assert np.array_equal(d.values[rid], row)


def test_duplication_counts_against_original_n():
    d = numeric_table(55, 2)
    sp = spec(DUPLICATION)
    prev = None
    for level in DEFAULT_SCHEDULE:
        out, tr = corrupt(d, sp, level, 1)
        assert out.n_rows - 55 == math.floor(level * 55 / 100)
        if prev is not None:
            assert tr.added_sources[: len(prev)] == prev
        prev = tr.added_sources


def test_determinism(mixed):
    sp = spec(NOISY_VALUES, ["age", "city"])
    a, ta = corrupt(mixed, sp, 60, 123)
    b, tb = corrupt(mixed, sp, 60, 123)
    assert a == b and ta == tb and ta.digest() == tb.digest()
    c, _ = corrupt(mixed, sp, 60, 124)
    assert not c == a


def test_input_is_not_modified(mixed):
    before = mixed.checksum()
    corrupt(mixed, spec(MISSING_VALUES, ["age"]), 80, 0)
    corrupt(mixed, spec(DUPLICATION), 80, 0)
    assert mixed.checksum() == before


# exhaustive property check on 50 x 5 tables, 100 seeds
@pytest.mark.parametrize("tag", CELL_TYPES + (MISLABELING,))
def test_counts_nesting_and_labels_exhaustive(tag):
    for seed in range(100):
        d = numeric_table(50, 5, seed=seed, balance=0.4)
        x = np.array(d.column("x3"))
        x[seed % 7 :: 9] = np.nan  # some pre-existing nulls shrink the eligible pool
        d = d.replace(values=np.column_stack([d.values[:, :3], x, d.values[:, 4:]]))
        feats = () if tag == MISLABELING else ("x1", "x3")
        sp = spec(tag, feats)
        prev_cells, prev_values = set(), None
        labels = Counter(d.target_codes())
        for level in DEFAULT_SCHEDULE:
            out, tr = corrupt(d, sp, level, seed)
            cells = touched(tr)
            for name in feats or (d.target,):
                eligible = int((~np.isnan(d.column(name))).sum())
                mine = {c for c in cells if c[1] == name}
                assert len(mine) == math.floor(level / 100 * eligible)
                changed = changed_mask(d.column(name), out.column(name))
                assert changed.sum() == len(mine)
            assert prev_cells <= cells
            if prev_values is not None:
                # cells touched earlier keep their corrupted value
                for rid, name in prev_cells:
                    j = d.column_index(name)
                    a, b = prev_values[rid, j], out.values[rid, j]
                    assert a == b or (np.isnan(a) and np.isnan(b))
            if tag != MISLABELING:
                assert Counter(out.target_codes()) == labels
            prev_cells, prev_values = cells, out.values


@given(st.integers(0, 2**63), st.sampled_from([20, 40, 60, 80]), st.sampled_from(CELL_TYPES))
def test_count_property(seed, level, tag):
    d = numeric_table(37, 3, seed=seed % 97)
    out, tr = corrupt(d, spec(tag, ["x0"]), level, seed)
    assert len(tr.touched_cells) == math.floor(level * 37 / 100)


# -- strategies --------------------------------------------------------------


def test_one_feature_at_a_time_order(table50):
    specs = one_feature_at_a_time(table50, [NOISY_VALUES, OUTLIERS], ["x2", "x0"])
    assert [(s.error_type.tag, s.features) for s in specs] == [
        (NOISY_VALUES, ("x2",)),
        (NOISY_VALUES, ("x0",)),
        (OUTLIERS, ("x2",)),
        (OUTLIERS, ("x0",)),
    ]
    assert len(one_feature_at_a_time(table50, [MISSING_VALUES], ["x1"])) == 1
    with pytest.raises(EmptyFeatureList):
        one_feature_at_a_time(table50, [NOISY_VALUES], [])


def test_one_feature_at_a_time_count():
    d = numeric_table(30, 17)
    assert len(one_feature_at_a_time(d, [NOISY_VALUES, OUTLIERS], d.feature_names)) == 34


def test_outliers_skip_categorical(mixed):
    with pytest.warns(UserWarning):
        specs = one_feature_at_a_time(mixed, [OUTLIERS], ["age", "city"])
    assert [s.features for s in specs] == [("age",)]


def test_correlated_groups():
    rng = np.random.default_rng(0)
    a = rng.normal(size=80)
    cols = {
        "a": a,
        "a2": a.copy(),
        "b": rng.normal(size=80),
        "c": rng.normal(size=80),
        "y": rng.random(80) < 0.5,
    }
    d = from_columns(cols, "y")
    assert correlated_groups(d, 0.9) == [("a", "a2")]
    assert correlated_groups(d, 1.0) == [("a", "a2")]
    specs = correlated_features(d, [NOISY_VALUES, OUTLIERS], 0.9)
    assert [s.features for s in specs] == [("a", "a2"), ("a", "a2")]


def test_correlated_groups_none_on_random_table():
    d = numeric_table(60, 6, seed=1)
    assert correlated_features(d, [NOISY_VALUES], 1.0) == []


def test_correlated_groups_need_numeric(mixed):
    d = from_columns({"c": ["a", "b", "a"], "n": [1.0, 2.0, 3.0], "y": [True, False, True]}, "y")
    with pytest.raises(InsufficientNumericColumns):
        correlated_groups(d, 0.5)


def test_spec_json_round_trip():
    sp = CorruptionSpec(
        ErrorType(OUTLIERS, outlier_range=(2, 6)),
        ("x0", "x1"),
        SeveritySchedule((0, 10, 50)),
        (Condition("x2", "<", 0.5),),
    )
    assert CorruptionSpec.from_json(sp.to_json()) == sp
