"""Error Sensitivity Profile: EPC, AEPC and the piecewise slope vector.

An :class:`ErrorPerformanceCurve` holds the performance ``p_k`` measured
at corruption levels ``e_k`` (percentages, ``e_0 = 0`` being the clean
baseline). Slopes are expressed in metric units per percentage point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats as sps

from .errors import MixedSchedules, SchemaViolation, TooFewPoints, TooFewRuns, ZeroBaseline
from .learn import PerfMetric

BASELINE_TOL = 1e-9


@dataclass(frozen=True)
class ErrorPerformanceCurve:
    e: tuple[float, ...]
    p: tuple[float, ...]
    metric: PerfMetric = field(default_factory=PerfMetric)
    run_seed: int = 0

    def __post_init__(self):
        e = tuple(float(v) for v in self.e)
        p = tuple(float(v) for v in self.p)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "p", p)
        if len(e) != len(p):
            raise SchemaViolation("e and p must have the same length")
        if len(e) < 2:
            raise TooFewPoints("a curve needs at least two points")
        if e[0] != 0:
            raise SchemaViolation("the first point must sit at e = 0")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise SchemaViolation("e must be strictly increasing")

    @property
    def baseline(self) -> float:
        return self.p[0]

    @property
    def e_max(self) -> float:
        return self.e[-1]


class EPC(NamedTuple):
    value: float
    degenerate: bool


@dataclass(frozen=True)
class SlopeRegion:
    start: float
    end: float
    beta: float
    first: int
    last: int

    @property
    def n_points(self) -> int:
        return self.last - self.first + 1

    @property
    def directional(self) -> bool:
        """Two-point regions give an exact fit with no residual freedom."""
        return self.n_points == 2


@dataclass(frozen=True)
class ESPProfile:
    epc: EPC
    aepc: float
    slopes: tuple[SlopeRegion, ...]
    curve: ErrorPerformanceCurve

    @property
    def metric(self) -> PerfMetric:
        return self.curve.metric


def _check(curve_or_points):
    if isinstance(curve_or_points, ErrorPerformanceCurve):
        return np.asarray(curve_or_points.e), np.asarray(curve_or_points.p)
    e, p = curve_or_points
    if len(e) < 2:
        raise TooFewPoints("need at least two points")
    return np.asarray(e, dtype=float), np.asarray(p, dtype=float)


def epc(curve: ErrorPerformanceCurve) -> EPC:
    """Negated Pearson correlation between corruption level and performance.

    Positive values mean performance drops as corruption grows. A constant
    level or performance sequence gives ``EPC(0.0, degenerate=True)``.
    """
    e, p = _check(curve)
    if np.ptp(e) == 0 or np.ptp(p) == 0:
        return EPC(0.0, True)
    de = e - e.mean()
    dp = p - p.mean()
    see = float(de @ de)
    spp = float(dp @ dp)
    r = float(de @ dp) / math.sqrt(see * spp)
    return EPC(-min(1.0, max(-1.0, r)), False)


def aepc(curve: ErrorPerformanceCurve) -> float:
    """Trapezoidal area between the curve and its baseline, over ``p0 * e_max``.

    Negative values mean a net loss relative to the clean baseline.
    """
    e, p = _check(curve)
    p0 = float(p[0])
    if p0 <= BASELINE_TOL:
        raise ZeroBaseline(f"baseline performance {p0} is too close to zero")
    dev = p - p0
    area = float(np.sum(np.diff(e) * (dev[1:] + dev[:-1]) / 2.0))
    return area / (p0 * float(e[-1] - e[0]))


def _signs(p: np.ndarray) -> np.ndarray:
    s = np.sign(np.diff(p))
    nz = np.flatnonzero(s)
    if len(nz) == 0:
        return s
    s[: nz[0]] = s[nz[0]]
    for k in range(nz[0] + 1, len(s)):
        if s[k] == 0:
            s[k] = s[k - 1]
    return s


def boundaries(p: Sequence[float]) -> list[int]:
    """Point indices delimiting the maximal monotone regions, ends included."""
    s = _signs(np.asarray(p, dtype=float))
    inner = [k + 1 for k in range(len(s) - 1) if s[k] != s[k + 1]]
    return [0, *inner, len(p) - 1]


def ols_slope(e: Sequence[float], p: Sequence[float]) -> float:
    e = np.asarray(e, dtype=float)
    p = np.asarray(p, dtype=float)
    de = e - e.mean()
    return float(de @ (p - p.mean()) / (de @ de))


def _regions(e, p, cuts) -> tuple[SlopeRegion, ...]:
    return tuple(
        SlopeRegion(float(e[a]), float(e[b]), ols_slope(e[a : b + 1], p[a : b + 1]), a, b)
        for a, b in zip(cuts, cuts[1:])
    )


def piecewise_slopes(curve: ErrorPerformanceCurve) -> tuple[SlopeRegion, ...]:
    """Split the curve at sign changes of its first differences and fit OLS per region.

    Zero differences inherit the previous non-zero sign (a leading run of
    zeros takes the first non-zero sign), so plateaus never open a region.
    """
    e, p = _check(curve)
    return _regions(e, p, boundaries(p))


def profile(curve: ErrorPerformanceCurve) -> ESPProfile:
    return ESPProfile(epc(curve), aepc(curve), piecewise_slopes(curve), curve)


# -- aggregation -------------------------------------------------------------


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard deviation and a two-sided t interval."""

    mean: float
    std: float
    n: int
    ci_low: float
    ci_high: float

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0

    def to_json(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n": self.n, "ci_low": self.ci_low, "ci_high": self.ci_high}


def t_interval(values: Sequence[float], confidence: float = 0.95) -> Estimate:
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n < 2:
        raise TooFewRuns("a confidence interval needs at least two values")
    mean = float(x.mean())
    std = float(x.std(ddof=1))
    half = float(sps.t.ppf(0.5 + confidence / 2.0, n - 1)) * std / math.sqrt(n)
    return Estimate(mean, std, n, mean - half, mean + half)


@dataclass(frozen=True)
class RegionEstimate:
    start: float
    end: float
    beta: Estimate


@dataclass(frozen=True)
class AggregateESP:
    epc: Estimate
    aepc: Estimate
    slopes: tuple[RegionEstimate, ...]
    levels: tuple[float, ...]
    performance: tuple[Estimate, ...]
    degenerate_runs: int
    metric: PerfMetric
    alignment: str = "union-of-boundaries"

    @property
    def n(self) -> int:
        return self.epc.n

    def to_json(self) -> dict:
        return {
            "n_runs": self.n,
            "metric": self.metric.to_json(),
            "epc": self.epc.to_json(),
            "epc_degenerate_runs": self.degenerate_runs,
            "aepc": self.aepc.to_json(),
            "slope_alignment": self.alignment,
            "slopes": [{"start": r.start, "end": r.end, "beta": r.beta.to_json()} for r in self.slopes],
            "levels": list(self.levels),
            "performance": [est.to_json() for est in self.performance],
        }


def aggregate(profiles: Sequence[ESPProfile], confidence: float = 0.95) -> AggregateESP:
    """Average per-run profiles and attach t-based confidence intervals.

    Runs may disagree on the number of monotone regions. Every run is
    re-segmented on the union of all runs' boundary levels before the slopes
    are averaged region by region.
    """
    if len(profiles) < 2:
        raise TooFewRuns(f"need at least 2 runs, got {len(profiles)}")
    first = profiles[0].curve
    for prof in profiles[1:]:
        if prof.curve.e != first.e:
            raise MixedSchedules("runs use different severity schedules")
        if prof.metric != first.metric:
            raise MixedSchedules("runs use different performance metrics")
    e = np.asarray(first.e)
    cut_set = set()
    for prof in profiles:
        cut_set.update(boundaries(prof.curve.p))
    cuts = sorted(cut_set)
    per_run = [[r.beta for r in _regions(e, np.asarray(prof.curve.p), cuts)] for prof in profiles]
    betas = np.asarray(per_run)
    slopes = tuple(
        RegionEstimate(float(e[a]), float(e[b]), t_interval(betas[:, j], confidence))
        for j, (a, b) in enumerate(zip(cuts, cuts[1:]))
    )
    perf = np.asarray([prof.curve.p for prof in profiles])
    return AggregateESP(
        epc=t_interval([prof.epc.value for prof in profiles], confidence),
        aepc=t_interval([prof.aepc for prof in profiles], confidence),
        slopes=slopes,
        levels=first.e,
        performance=tuple(t_interval(perf[:, k], confidence) for k in range(perf.shape[1])),
        degenerate_runs=sum(prof.epc.degenerate for prof in profiles),
        metric=first.metric,
    )


# -- curve interchange -------------------------------------------------------


def curves_to_json(curves: Sequence[ErrorPerformanceCurve]) -> dict:
    if not curves:
        raise SchemaViolation("no curves to export")
    metric = curves[0].metric
    return {
        "metric": metric.tag,
        "positive_class": metric.positive_class,
        "runs": [
            {"seed": c.run_seed, "points": [{"e": e, "p": p} for e, p in zip(c.e, c.p)]} for c in curves
        ],
    }


def export_curves(curves: Sequence[ErrorPerformanceCurve], path) -> None:
    Path(path).write_text(json.dumps(curves_to_json(curves), indent=2) + "\n", encoding="utf-8")


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaViolation(f"{where} must be a finite number")
    return float(v)


def curves_from_json(doc) -> list[ErrorPerformanceCurve]:
    """Validate and parse a curve-interchange document."""
    if not isinstance(doc, dict):
        raise SchemaViolation("top level must be an object")
    tag = doc.get("metric")
    if tag not in ("f1", "accuracy"):
        raise SchemaViolation("metric must be 'f1' or 'accuracy'")
    pos = doc.get("positive_class")
    if pos is not None and not isinstance(pos, str):
        raise SchemaViolation("positive_class must be a string")
    metric = PerfMetric(tag, pos)
    runs = doc.get("runs")
    if not isinstance(runs, list) or not runs:
        raise SchemaViolation("runs must be a non-empty list")
    out = []
    for i, run in enumerate(runs):
        if not isinstance(run, dict) or not isinstance(run.get("points"), list):
            raise SchemaViolation(f"runs[{i}] needs a points list")
        seed = run.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise SchemaViolation(f"runs[{i}].seed must be an unsigned 64-bit integer")
        e, p = [], []
        for k, pt in enumerate(run["points"]):
            if not isinstance(pt, dict):
                raise SchemaViolation(f"runs[{i}].points[{k}] must be an object")
            e.append(_number(pt.get("e"), f"runs[{i}].points[{k}].e"))
            val = _number(pt.get("p"), f"runs[{i}].points[{k}].p")
            if not 0 <= val <= 1:
                raise SchemaViolation(f"runs[{i}].points[{k}].p must lie in [0, 1]")
            p.append(val)
        if len(e) < 2:
            raise SchemaViolation(f"runs[{i}] needs at least two points")
        if e[0] != 0:
            raise SchemaViolation(f"runs[{i}] must start at e = 0")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise SchemaViolation(f"runs[{i}] e values must be strictly increasing")
        out.append(ErrorPerformanceCurve(tuple(e), tuple(p), metric, seed))
    return out


def import_curves(path) -> list[ErrorPerformanceCurve]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from None
    return curves_from_json(doc)
