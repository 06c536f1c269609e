"""Canonical ESP report: an annotated error-performance plot as SVG plus JSON.

The SVG is written by hand (no plotting library) so that it is
deterministic, diffable and self-contained. Every number printed in the
figure also appears in the JSON mirror, and each printed annotation carries
a ``data-key`` attribute naming the JSON field it came from.
"""

from __future__ import annotations

import json
from xml.sax.saxutils import escape, quoteattr

from .errors import ScenarioNotFound, TooFewRuns

DIGITS = 4

WIDTH, HEIGHT = 720, 460
LEFT, RIGHT, TOP, BOTTOM = 70, 30, 80, 60


def fmt(v: float) -> str:
    s = f"{v:.{DIGITS}f}"
    return "0." + "0" * DIGITS if s == "-0." + "0" * DIGITS else s


def find_scenario(analysis: dict, sid: str) -> dict:
    for sc in analysis["scenarios"]:
        if sc["scenario_id"] == sid or sc["scenario_id"].startswith(sid) and len(sid) >= 6:
            return sc
    raise ScenarioNotFound(f"scenario {sid!r} not in analysis")


def build_report(analysis: dict, sid: str) -> dict:
    """Numbers behind the canonical plot of one scenario."""
    sc = find_scenario(analysis, sid)
    agg = sc["aggregate"]
    if agg is None:
        raise TooFewRuns(f"scenario {sid} has fewer than two usable runs")
    perf = agg["performance"]
    regions = [
        {
            "index": j + 1,
            "start": r["start"],
            "end": r["end"],
            "beta": r["beta"]["mean"],
            "beta_ci": [r["beta"]["ci_low"], r["beta"]["ci_high"]],
            "directional": _directional(agg["levels"], r),
        }
        for j, r in enumerate(agg["slopes"])
    ]
    out = {
        "scenario_id": sc["scenario_id"],
        "model": sc["model"],
        "error_type": sc["error_type"],
        "features": sc["features"],
        "metric": sc["metric"]["tag"],
        "n_runs": agg["n_runs"],
        "epc": agg["epc"]["mean"],
        "epc_ci": [agg["epc"]["ci_low"], agg["epc"]["ci_high"]],
        "aepc": agg["aepc"]["mean"],
        "aepc_ci": [agg["aepc"]["ci_low"], agg["aepc"]["ci_high"]],
        "baseline": perf[0]["mean"],
        "levels": agg["levels"],
        "performance": [p["mean"] for p in perf],
        "ci_low": [p["ci_low"] for p in perf],
        "ci_high": [p["ci_high"] for p in perf],
        "regions": regions,
        "verdicts": sc.get("verdicts", {}),
        "digits": DIGITS,
    }
    out["printed"] = printed_values(out)
    return out


def _directional(levels, region) -> bool:
    inside = [e for e in levels if region["start"] <= e <= region["end"]]
    return len(inside) == 2


def printed_values(rep: dict) -> dict:
    """Every annotation string that appears in the SVG, keyed like the JSON."""
    out = {
        "epc": fmt(rep["epc"]),
        "aepc": fmt(rep["aepc"]),
        "baseline": fmt(rep["baseline"]),
    }
    for r in rep["regions"]:
        out[f"regions.{r['index']}.beta"] = fmt(r["beta"])
    return out


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) * (b - a) / span


def render_svg(rep: dict) -> str:
    levels = rep["levels"]
    lows, highs = rep["ci_low"], rep["ci_high"]
    y_lo = min(min(lows), min(rep["performance"]), rep["baseline"])
    y_hi = max(max(highs), max(rep["performance"]), rep["baseline"])
    pad = 0.08 * (y_hi - y_lo) if y_hi > y_lo else 0.05
    y_lo, y_hi = y_lo - pad, y_hi + pad
    sx = _scale(0.0, levels[-1], LEFT, WIDTH - RIGHT)
    sy = _scale(y_lo, y_hi, HEIGHT - BOTTOM, TOP)
    printed = rep["printed"]

    def pt(x, y):
        return f"{sx(x):.2f},{sy(y):.2f}"

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    title = f"{rep['model']} | {rep['error_type']} on {', '.join(rep['features']) or 'rows'} | {rep['metric']} | n = {rep['n_runs']}"
    parts.append(f'<text x="{LEFT}" y="24" font-size="14" font-weight="bold">{escape(title)}</text>')
    parts.append(
        f'<text x="{LEFT}" y="46">EPC = <tspan data-key="epc">{printed["epc"]}</tspan>'
        f'   AEPC = <tspan data-key="aepc">{printed["aepc"]}</tspan>'
        f'   baseline = <tspan data-key="baseline">{printed["baseline"]}</tspan></text>'
    )

    # axes and ticks
    x0, x1, yb, yt = LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP
    parts.append(f'<line x1="{x0}" y1="{yb}" x2="{x1}" y2="{yb}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{yb}" x2="{x0}" y2="{yt}" stroke="black"/>')
    for e in levels:
        x = sx(e)
        parts.append(f'<line x1="{x:.2f}" y1="{yb}" x2="{x:.2f}" y2="{yb + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{yb + 18}" text-anchor="middle">{e:g}</text>')
    for k in range(5):
        v = y_lo + k * (y_hi - y_lo) / 4
        y = sy(v)
        parts.append(f'<line x1="{x0 - 5}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end">{v:.3f}</text>')
    parts.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 18}" text-anchor="middle">corruption level (%)</text>')
    parts.append(
        f'<text x="18" y="{(yb + yt) / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(yb + yt) / 2:.2f})">{escape(rep["metric"])}</text>'
    )

    # confidence band, baseline, mean curve
    band = [pt(e, h) for e, h in zip(levels, highs)] + [pt(e, lo) for e, lo in reversed(list(zip(levels, lows)))]
    parts.append(f'<polygon class="ci-band" points="{" ".join(band)}" fill="#9ecae1" fill-opacity="0.5" stroke="none"/>')
    yb0 = sy(rep["baseline"])
    parts.append(
        f'<line class="baseline" x1="{x0}" y1="{yb0:.2f}" x2="{x1}" y2="{yb0:.2f}" '
        'stroke="grey" stroke-dasharray="6 4"/>'
    )
    curve = " ".join(pt(e, p) for e, p in zip(levels, rep["performance"]))
    parts.append(f'<polyline class="mean-curve" points="{curve}" fill="none" stroke="#08519c" stroke-width="2"/>')
    for e, p in zip(levels, rep["performance"]):
        parts.append(f'<circle cx="{sx(e):.2f}" cy="{sy(p):.2f}" r="3" fill="#08519c"/>')

    # region boundaries and slope annotations
    for r in rep["regions"]:
        if r["index"] > 1:
            xb = sx(r["start"])
            parts.append(
                f'<line class="region-boundary" x1="{xb:.2f}" y1="{yb}" x2="{xb:.2f}" y2="{yt}" '
                'stroke="#d94801" stroke-dasharray="2 3"/>'
            )
        key = f"regions.{r['index']}.beta"
        xm = sx((r["start"] + r["end"]) / 2)
        mark = " *" if r["directional"] else ""
        parts.append(
            f'<text class="slope" x="{xm:.2f}" y="{TOP - 10}" text-anchor="middle" fill="#d94801">'
            f'&#946;{r["index"]} = <tspan data-key={quoteattr(key)}>{printed[key]}</tspan>{mark}</text>'
        )
    if any(r["directional"] for r in rep["regions"]):
        parts.append(f'<text x="{x1}" y="{HEIGHT - 4}" text-anchor="end" font-size="10">* two-point region, direction only</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_json(rep: dict) -> str:
    return json.dumps(rep, indent=2, allow_nan=False) + "\n"
