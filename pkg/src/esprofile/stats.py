"""Scenario filtering: Wilcoxon signed-rank, Benjamini-Yekutieli, relevance cut."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .errors import EmptyInput, PValueOutOfRange, TooFewPairs

MIN_PAIRS = 6
EXACT_CUTOFF = 25


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str
    all_zero: bool = False


def _exact_lower_tail(doubled_ranks: np.ndarray, w2: int) -> float:
    """P(W+ <= w) under random signs, ranks given as integers 2*rank."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return float(counts[: w2 + 1].sum() / counts.sum())


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float], method: str = "auto") -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are dropped; tied absolute differences get midranks.
    ``W = min(W+, W-)``. The p-value uses the exact permutation
    distribution of the observed ranks (ties included) when at most 25
    non-zero differences remain and ``method`` is ``"auto"``, otherwise a
    normal approximation with continuity and tie corrections. If every
    difference is zero the result has ``p_value = 1`` and ``all_zero`` set.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and of equal length")
    if len(x) < MIN_PAIRS:
        raise TooFewPairs(f"need at least {MIN_PAIRS} pairs, got {len(x)}")
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "none", all_zero=True)
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    use_exact = method == "exact" or (method == "auto" and n <= EXACT_CUTOFF)
    if use_exact:
        doubled = np.rint(2 * ranks).astype(np.int64)
        p = min(1.0, 2.0 * _exact_lower_tail(doubled, int(round(2 * w))))
        return WilcoxonResult(w, p, n, "exact")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts**3 - tie_counts) / 48.0
    if var <= 0:
        return WilcoxonResult(w, 1.0, n, "approx")
    z = max(0.0, abs(w - mean) - 0.5) / math.sqrt(var)
    p = min(1.0, 2.0 * float(norm.sf(z)))
    return WilcoxonResult(w, p, n, "approx")


def by_constant(m: int) -> float:
    """Harmonic factor c(m) = sum_{i=1}^m 1/i."""
    return math.fsum(1.0 / i for i in range(1, m + 1))


def _check_p(p_values) -> np.ndarray:
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        raise EmptyInput("no p-values given")
    if np.isnan(p).any() or (p < 0).any() or (p > 1).any():
        raise PValueOutOfRange("p-values must lie in [0, 1]")
    return p


def benjamini_yekutieli(p_values: Sequence[float], alpha: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """BY step-up adjustment.

    Returns ``(adjusted, rejected)`` in input order, where
    ``adjusted_(i) = min(1, min_{j >= i} m c(m) p_(j) / j)`` and a hypothesis
    is rejected when its adjusted value is at most ``alpha``.
    """
    p = _check_p(p_values)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    m = len(p)
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m * by_constant(m) / np.arange(1, m + 1)
    tail_min = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.empty(m)
    adjusted[order] = np.minimum(1.0, tail_min)
    return adjusted, adjusted <= alpha


@dataclass(frozen=True)
class ScenarioOutcome:
    """Paired per-run performance at baseline and at maximum corruption."""

    scenario_id: str
    baseline_perf: tuple[float, ...]
    max_corruption_perf: tuple[float, ...]
    mean_aepc: float

    def __post_init__(self):
        if len(self.baseline_perf) != len(self.max_corruption_perf):
            raise ValueError("baseline and corrupted samples must be paired")


@dataclass(frozen=True)
class ScenarioVerdict:
    scenario_id: str
    raw_p: float
    adjusted_p: float
    statistic: float
    n_effective: int
    method: str
    mean_aepc: float
    significant: bool
    relevant: bool
    note: str = ""

    @property
    def retained(self) -> bool:
        return self.significant and self.relevant


@dataclass(frozen=True)
class SignificanceReport:
    verdicts: tuple[ScenarioVerdict, ...]
    alpha: float
    delta: float
    m: int
    c_m: float
    zero_handling: str = "wilcox"
    alternative: str = "two-sided"

    @property
    def retained(self) -> list[str]:
        return [v.scenario_id for v in self.verdicts if v.retained]

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "delta": self.delta,
            "m": self.m,
            "c_m": self.c_m,
            "zero_handling": self.zero_handling,
            "alternative": self.alternative,
            "retained": self.retained,
            "scenarios": [
                {
                    "scenario_id": v.scenario_id,
                    "raw_p": v.raw_p,
                    "adjusted_p": v.adjusted_p,
                    "statistic": None if math.isnan(v.statistic) else v.statistic,
                    "n_effective": v.n_effective,
                    "method": v.method,
                    "mean_aepc": v.mean_aepc,
                    "significant": v.significant,
                    "relevant": v.relevant,
                    "retained": v.retained,
                    "note": v.note,
                }
                for v in self.verdicts
            ],
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def two_stage_filter(outcomes: Sequence[ScenarioOutcome], alpha: float = 0.05, delta: float = 0.05) -> SignificanceReport:
    """Wilcoxon per scenario, BY across scenarios, then ``|mean AEPC| > delta``.

    Scenarios with fewer than six paired runs cannot be tested; they keep
    ``raw_p = 1`` and a note instead of aborting the whole report.
    """
    if not outcomes:
        raise EmptyInput("no scenario outcomes")
    if not 0 < alpha < 1 or not 0 < delta < 1:
        raise ValueError("alpha and delta must lie in (0, 1)")
    tests = []
    for o in outcomes:
        try:
            res = wilcoxon_signed_rank(o.max_corruption_perf, o.baseline_perf)
            note = "all differences zero" if res.all_zero else ""
        except TooFewPairs:
            res = WilcoxonResult(float("nan"), 1.0, 0, "none")
            note = f"fewer than {MIN_PAIRS} paired runs"
        tests.append((res, note))
    raw = [res.p_value for res, _ in tests]
    adjusted, rejected = benjamini_yekutieli(raw, alpha)
    verdicts = tuple(
        ScenarioVerdict(
            scenario_id=o.scenario_id,
            raw_p=res.p_value,
            adjusted_p=float(adj),
            statistic=res.statistic,
            n_effective=res.n_effective,
            method=res.method,
            mean_aepc=o.mean_aepc,
            significant=bool(rej),
            relevant=abs(o.mean_aepc) > delta,
            note=note,
        )
        for o, (res, note), adj, rej in zip(outcomes, tests, adjusted, rejected)
    )
    m = len(outcomes)
    return SignificanceReport(verdicts, alpha, delta, m, by_constant(m))


CSV_FIELDS = (
    "scenario_id",
    "raw_p",
    "adjusted_p",
    "mean_aepc",
    "significant",
    "relevant",
    "retained",
)


def report_csv(report: SignificanceReport, extra: dict[str, dict] | None = None, extra_fields: Sequence[str] = ()) -> str:
    """One row per scenario; ``extra`` maps scenario id to additional columns."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*CSV_FIELDS, *extra_fields])
    for v in report.verdicts:
        more = (extra or {}).get(v.scenario_id, {})
        w.writerow(
            [
                v.scenario_id,
                repr(v.raw_p),
                repr(v.adjusted_p),
                repr(v.mean_aepc),
                int(v.significant),
                int(v.relevant),
                int(v.retained),
                *(more.get(f, "") for f in extra_fields),
            ]
        )
    return buf.getvalue()
