import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from esprofile.errors import MixedSchedules, SchemaViolation, TooFewPoints, TooFewRuns, ZeroBaseline
from esprofile.esp import (
    ErrorPerformanceCurve,
    aepc,
    aggregate,
    boundaries,
    curves_from_json,
    epc,
    export_curves,
    import_curves,
    piecewise_slopes,
    profile,
    t_interval,
)
from esprofile.learn import PerfMetric

E5 = (0, 20, 40, 60, 80)


def curve(p, e=E5, seed=0, metric=None):
    return ErrorPerformanceCurve(tuple(e), tuple(p), metric or PerfMetric(), seed)


perf = st.floats(0.01, 1.0, allow_nan=False)
perf5 = st.lists(perf, min_size=5, max_size=5)


def ols_oracle(x, y):
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    return sum((a - mx) * (b - my) for a, b in zip(x, y)) / sum((a - mx) ** 2 for a in x)


def trapezoid_oracle(e, p):
    p0 = p[0]
    area = 0.0
    for k in range(1, len(e)):
        area += (e[k] - e[k - 1]) * ((p[k] - p0) + (p[k - 1] - p0)) / 2
    return area / (p0 * e[-1])


# -- curve type --------------------------------------------------------------


def test_curve_invariants():
    with pytest.raises(TooFewPoints):
        curve([0.5], e=[0])
    with pytest.raises(SchemaViolation):
        curve([0.5, 0.4], e=[10, 20])
    with pytest.raises(SchemaViolation):
        curve([0.5, 0.4, 0.3], e=[0, 20, 20])


# -- EPC ---------------------------------------------------------------------


def test_epc_perfect_lines():
    assert epc(curve([1.0, 0.9, 0.8, 0.7, 0.6])) == (1.0, False)
    assert epc(curve([0.6, 0.7, 0.8, 0.9, 1.0])).value == -1.0


def test_epc_constant_is_degenerate():
    assert epc(curve([0.8] * 5)) == (0.0, True)


@given(perf5, st.floats(0.01, 100), st.floats(-10, 10))
def test_epc_affine_invariance(p, a, b):
    assume(np.ptp(p) > 1e-6)
    base = epc(curve(p)).value
    q = [a * v + b for v in p]
    got = epc(ErrorPerformanceCurve(E5, tuple(q))).value
    assert abs(got - base) < 1e-12


@given(perf5, st.floats(0.1, 50), st.floats(0, 50))
def test_epc_invariant_to_affine_e(p, a, b):
    assume(np.ptp(p) > 1e-6)
    e = tuple(a * x + b for x in E5)
    got = epc((e, p)).value
    assert abs(got - epc(curve(p)).value) < 1e-12


# -- AEPC --------------------------------------------------------------------


def test_aepc_canonical_line():
    assert aepc(curve([1.0, 0.9, 0.8, 0.7, 0.6])) == pytest.approx(-0.20, abs=1e-12)


def test_aepc_flat_is_zero():
    assert aepc(curve([0.7] * 5)) == 0.0


def test_aepc_uniform_ten_percent_loss():
    # step down by 10% after e = 0: the first trapezoid only counts half the step
    got = aepc(curve([1.0, 0.9, 0.9, 0.9, 0.9]))
    assert got == pytest.approx(-0.10 + 0.10 * 10 / 80, abs=1e-12)
    assert got == pytest.approx(trapezoid_oracle(E5, [1.0, 0.9, 0.9, 0.9, 0.9]), abs=1e-12)


def test_aepc_zero_baseline():
    with pytest.raises(ZeroBaseline):
        aepc(curve([0.0, 0.5, 0.5, 0.5, 0.5]))
    with pytest.raises(ZeroBaseline):
        aepc(curve([1e-10, 0.5, 0.5, 0.5, 0.5]))


@given(perf5, st.floats(0.01, 100))
def test_aepc_invariant_to_scaling_e(p, c):
    e = tuple(c * x for x in E5)
    assert abs(aepc((e, p)) - aepc(curve(p))) < 1e-12


# -- piecewise slopes --------------------------------------------------------


def test_single_region_line():
    regions = piecewise_slopes(curve([1.0, 0.9, 0.8, 0.7, 0.6]))
    assert len(regions) == 1
    assert (regions[0].start, regions[0].end) == (0.0, 80.0)
    assert regions[0].beta == pytest.approx(-0.005, abs=1e-15)


def test_worked_three_region_example():
    regions = piecewise_slopes(curve([0.8, 0.6, 0.7, 0.9, 0.5]))
    assert [(r.start, r.end) for r in regions] == [(0, 20), (20, 60), (60, 80)]
    for r, ref in zip(regions, (-0.010, 0.0075, -0.020)):
        assert abs(r.beta - ref) < 1e-12
    assert [r.directional for r in regions] == [True, False, True]


def test_constant_curve_one_flat_region():
    regions = piecewise_slopes(curve([0.5] * 5))
    assert len(regions) == 1 and regions[0].beta == 0.0


def test_plateaus_do_not_split():
    assert boundaries([0.5, 0.5, 0.6, 0.6, 0.7]) == [0, 4]
    assert boundaries([0.5, 0.6, 0.6, 0.5, 0.5]) == [0, 2, 4]


@given(perf5)
def test_regions_partition_and_match_ols(p):
    c = curve(p)
    regions = piecewise_slopes(c)
    assert regions[0].start == 0.0 and regions[-1].end == 80.0
    for a, b in zip(regions, regions[1:]):
        assert a.end == b.start and a.last == b.first
    for r in regions:
        xs = list(c.e[r.first : r.last + 1])
        ys = list(c.p[r.first : r.last + 1])
        assert abs(r.beta - ols_oracle(xs, ys)) < 1e-12
        d = np.diff(ys)
        assert (d >= 0).all() or (d <= 0).all()


@given(st.lists(perf, min_size=5, max_size=5, unique=True))
def test_monotone_curve_single_region_sign(p):
    p = sorted(p, reverse=True)
    c = curve(p)
    regions = piecewise_slopes(c)
    assert len(regions) == 1
    assert abs(regions[0].beta - ols_oracle(list(c.e), p)) < 1e-12
    assert math.copysign(1, regions[0].beta) == -math.copysign(1, epc(c).value)


# -- aggregation -------------------------------------------------------------


def test_identical_profiles_have_zero_width():
    prof = profile(curve([1.0, 0.9, 0.8, 0.7, 0.6]))
    agg = aggregate([prof] * 4)
    assert agg.epc.mean == pytest.approx(1.0, abs=1e-15)
    assert agg.epc.ci_low == agg.epc.ci_high == agg.epc.mean
    assert agg.aepc.mean == pytest.approx(-0.2, abs=1e-12)


def test_two_run_t_interval():
    est = t_interval([0.8, 0.6])
    assert est.mean == pytest.approx(0.7, abs=1e-15)
    assert est.std == pytest.approx(math.sqrt(0.02), abs=1e-15)
    # t(0.975, 1) = 12.7062; half width = t * s / sqrt(2) = t * 0.1
    assert est.half_width == pytest.approx(12.706204736174698 * 0.1, abs=1e-9)


def test_too_few_runs_and_mixed_schedules():
    prof = profile(curve([1.0, 0.9, 0.8, 0.7, 0.6]))
    with pytest.raises(TooFewRuns):
        aggregate([prof])
    other = profile(curve([1.0, 0.9, 0.8], e=(0, 50, 100)))
    with pytest.raises(MixedSchedules):
        aggregate([prof, other])


@given(st.lists(perf5, min_size=2, max_size=8))
def test_aggregate_means_match_brute_force(ps):
    profs = [profile(curve(p, seed=i)) for i, p in enumerate(ps)]
    agg = aggregate(profs)
    assert abs(agg.epc.mean - sum(q.epc.value for q in profs) / len(profs)) < 1e-12
    assert abs(agg.aepc.mean - sum(q.aepc for q in profs) / len(profs)) < 1e-12
    for k, est in enumerate(agg.performance):
        assert abs(est.mean - sum(p[k] for p in ps) / len(ps)) < 1e-12
        assert est.ci_low <= est.mean <= est.ci_high
    assert agg.slopes[0].start == 0.0 and agg.slopes[-1].end == 80.0


def test_union_alignment_of_regions():
    a = profile(curve([1.0, 0.8, 0.6, 0.4, 0.2]))  # one region
    b = profile(curve([0.5, 0.7, 0.9, 0.6, 0.3], seed=1))  # boundary at 40
    agg = aggregate([a, b])
    assert [(r.start, r.end) for r in agg.slopes] == [(0, 40), (40, 80)]
    assert agg.slopes[0].beta.mean == pytest.approx((-0.01 + 0.01) / 2, abs=1e-12)


def test_ci_shrinks_with_more_runs():
    rng = np.random.default_rng(0)

    def width(n):
        p = 0.8 - 0.002 * np.array(E5) + rng.normal(0, 0.02, (n, 5))
        return aggregate([profile(curve(row, seed=i)) for i, row in enumerate(p)]).epc.half_width

    w = [np.mean([width(n) for _ in range(30)]) for n in (8, 32)]
    assert 1.5 < w[0] / w[1] < 3.0


# -- curve interchange -------------------------------------------------------


def test_export_import_round_trip(tmp_path):
    cs = [curve([0.9, 0.85, 0.8, 0.7, 0.5], seed=3), curve([0.91, 0.8, 0.82, 0.7, 0.4], seed=4)]
    path = tmp_path / "c.json"
    export_curves(cs, path)
    back = import_curves(path)
    assert back == cs
    assert profile(back[0]).epc.value > 0


@pytest.mark.parametrize(
    "points",
    [
        [{"e": 0, "p": 0.9}, {"e": 40, "p": 0.8}, {"e": 20, "p": 0.7}],
        [{"e": 0, "p": 0.9}, {"e": 20, "p": 0.8}, {"e": 20, "p": 0.7}],
        [{"e": 10, "p": 0.9}, {"e": 20, "p": 0.8}],
        [{"e": 0, "p": 1.5}, {"e": 20, "p": 0.8}],
        [{"e": 0, "p": "x"}, {"e": 20, "p": 0.8}],
    ],
)
def test_import_rejects_bad_points(points):
    with pytest.raises(SchemaViolation):
        curves_from_json({"metric": "f1", "runs": [{"seed": 1, "points": points}]})


def test_import_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(SchemaViolation):
        import_curves(path)
    with pytest.raises(SchemaViolation):
        curves_from_json({"metric": "auc", "runs": []})
