"""Store-level analysis: per-scenario aggregates, significance and a summary table."""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import EmptyStore, ESPError, ZeroBaseline
from .esp import aggregate, profile
from .learn import feature_importance
from .runner import RunStore, collect_curves
from .stats import ScenarioOutcome, SignificanceReport, report_csv, two_stage_filter
from .tabular import numeric_columns, pearson_matrix

ANALYSIS_FILE = "analysis.json"
SUMMARY_FIELDS = ("model", "error_type", "features")


def _delta_tag(delta: float) -> str:
    return f"{delta:.4f}".rstrip("0").rstrip(".")


@dataclass
class ScenarioAnalysis:
    scenario_id: str
    model: str
    error_type: str
    features: tuple[str, ...]
    n_runs: int
    zero_baseline_runs: int
    aggregate: dict | None
    outcome: ScenarioOutcome


def analyze_scenario(store: RunStore, sid: str) -> ScenarioAnalysis | None:
    """Aggregate one scenario; ``None`` when it has no complete repetition.

    Runs whose clean baseline is zero have no defined AEPC. They still enter
    the paired significance test but are left out of the ESP aggregate.
    """
    sc = store.scenario(sid)
    curves = collect_curves(store, sid)
    if not curves:
        return None
    profiles, zero = [], 0
    for c in curves:
        try:
            profiles.append(profile(c))
        except ZeroBaseline:
            zero += 1
    agg = None
    if len(profiles) >= 2:
        agg = aggregate(profiles).to_json()
        mean_aepc = agg["aepc"]["mean"]
    elif profiles:
        mean_aepc = profiles[0].aepc
    else:
        mean_aepc = 0.0
    outcome = ScenarioOutcome(
        sid,
        tuple(c.p[0] for c in curves),
        tuple(c.p[-1] for c in curves),
        float(mean_aepc),
    )
    return ScenarioAnalysis(
        sid,
        sc.model.label,
        sc.corruption.error_type.tag,
        sc.corruption.features,
        len(curves),
        zero,
        agg,
        outcome,
    )


def dataset_facts(store: RunStore, threshold: float = 0.5) -> dict:
    """Top feature by forest importance and the count of correlated pairs.

    Returns an empty dict when the dataset named in the manifest cannot be
    read any more.
    """
    cfg = store.config
    try:
        d0 = cfg.load_dataset()
    except (OSError, ValueError, LookupError, ESPError) as exc:
        warnings.warn(f"dataset unavailable, summary omits dataset facts: {exc}", stacklevel=2)
        return {}
    cm = pearson_matrix(d0, numeric_columns(d0))
    pairs = cm.pairs_above(threshold)
    imp = feature_importance(d0, seed=cfg.master_seed)
    top = max(imp, key=lambda k: (imp[k], k)) if imp else None
    return {
        "top_feature": top,
        "top_feature_importance": imp.get(top) if top else None,
        "correlated_pairs": len(pairs),
        "correlation_threshold": threshold,
    }


def summarize(analyses: Sequence[ScenarioAnalysis], report: SignificanceReport, facts: dict | None = None) -> dict:
    kept = set(report.retained)
    retained = [a for a in analyses if a.scenario_id in kept]
    models = Counter(a.model for a in retained)
    top_model = None
    if models:
        # ties broken alphabetically so the summary is stable
        label, count = min(models.items(), key=lambda kv: (-kv[1], kv[0]))
        top_model = {"label": label, "count": count}
    n = len(analyses)
    positive = sum(1 for a in retained if a.outcome.mean_aepc > 0)
    out = {
        "delta": report.delta,
        "alpha": report.alpha,
        "total_scenarios": n,
        "retained": len(retained),
        "retained_pct": 100.0 * len(retained) / n if n else 0.0,
        "most_frequent_model": top_model,
        "positive_aepc_pct": 100.0 * positive / len(retained) if retained else None,
    }
    out.update(facts or {})
    return out


def format_summary(summary: dict) -> str:
    rows = [
        ("Total scenarios", str(summary["total_scenarios"])),
        ("Significant scenarios", f"{summary['retained']} ({summary['retained_pct']:.0f}%)"),
    ]
    tm = summary.get("most_frequent_model")
    rows.append(("Most sensitive model", f"{tm['label']} ({tm['count']}/{summary['retained']})" if tm else "-"))
    pp = summary.get("positive_aepc_pct")
    rows.append(("Positive mean AEPC (%)", f"{pp:.0f}%" if pp is not None else "-"))
    if summary.get("top_feature"):
        rows.append(("Top feature (importance)", f"{summary['top_feature']} ({summary['top_feature_importance']:.3f})"))
    if "correlated_pairs" in summary:
        rows.append((f"Correlated pairs (r >= {summary['correlation_threshold']})", str(summary["correlated_pairs"])))
    width = max(len(k) for k, _ in rows)
    head = f"delta = {summary['delta']}, alpha = {summary['alpha']}"
    return "\n".join([head] + [f"  {k.ljust(width)}  {v}" for k, v in rows]) + "\n"


def analyze(store_dir, alpha: float = 0.05, deltas: Sequence[float] = (0.05,), facts: bool = True) -> dict:
    """Analyse a run store and write the report files next to it.

    Writes ``analysis.json`` (aggregates for every scenario plus one
    summary per delta), and ``significance_delta-<d>.json`` / ``.csv`` for
    each delta. Returns the analysis document.
    """
    store = RunStore.open(store_dir)
    root = Path(store_dir)
    analyses = []
    present = {sid for sid, _ in store.records}
    for sc in store.scenarios:
        if sc.id not in present:
            continue
        a = analyze_scenario(store, sc.id)
        if a is not None:
            analyses.append(a)
    if not analyses:
        raise EmptyStore(f"no complete repetition with corrupted levels in {store_dir}")
    outcomes = [a.outcome for a in analyses]
    dataset = dataset_facts(store) if facts else {}
    verdicts, summaries = {}, []
    for delta in deltas:
        rep = two_stage_filter(outcomes, alpha, delta)
        tag = _delta_tag(delta)
        extra = {
            a.scenario_id: {"model": a.model, "error_type": a.error_type, "features": "+".join(a.features)}
            for a in analyses
        }
        (root / f"significance_delta-{tag}.json").write_text(rep.to_json_text(), encoding="utf-8")
        (root / f"significance_delta-{tag}.csv").write_text(report_csv(rep, extra, SUMMARY_FIELDS), encoding="utf-8")
        verdicts[tag] = {v["scenario_id"]: v for v in rep.to_json()["scenarios"]}
        summaries.append(summarize(analyses, rep, dataset))
    doc = {
        "store": store.manifest["config_digest"],
        "alpha": alpha,
        "deltas": list(deltas),
        "summaries": summaries,
        "scenarios": [
            {
                "scenario_id": a.scenario_id,
                "model": a.model,
                "error_type": a.error_type,
                "features": list(a.features),
                "metric": store.config.metric.to_json(),
                "n_runs": a.n_runs,
                "zero_baseline_runs": a.zero_baseline_runs,
                "mean_aepc": a.outcome.mean_aepc,
                "aggregate": a.aggregate,
                "verdicts": {tag: by_id[a.scenario_id] for tag, by_id in verdicts.items()},
            }
            for a in analyses
        ],
    }
    (root / ANALYSIS_FILE).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return doc


def load_analysis(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / ANALYSIS_FILE
    return json.loads(path.read_text(encoding="utf-8"))
