"""Command-line front end: ``configure``, ``run``, ``analyze`` and ``report``.

Exit codes: 0 success, 1 usage error, 2 invalid input (config, schema,
missing file), 3 runtime failure. Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import analyze, format_summary, load_analysis
from .corrupt import DEFAULT_SCHEDULE, ERROR_TAGS
from .errors import ESPError, SchemaViolation, ValidationFailure
from .learn import MODEL_LABELS
from .report import build_report, render_json, render_svg
from .runner import ExperimentConfig, RunStore, enumerate_scenarios, run_experiment, validate_config

ENV_OUTPUT_DIR = "ESPROFILE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "esp-runs"

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3

STRATEGIES = ("one_feature_at_a_time", "correlated_features", "custom")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def default_output_dir() -> str:
    return os.environ.get(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR


def _fail(code: int, exc: BaseException, path: str = "") -> int:
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    path = path or getattr(exc, "path", "")
    if path:
        doc["path"] = path
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


# -- configure ---------------------------------------------------------------


def _csv_header(path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fh:
        return next(csv.reader(fh), [])


def _ask(prompt: str, default: str, stdin, stdout) -> str:
    stdout.write(f"{prompt} [{default}]: ")
    stdout.flush()
    line = stdin.readline()
    if not line:
        stdout.write("\n")
        return default
    return line.strip() or default


def _split_list(s: str) -> list[str]:
    return [t for t in s.replace(",", " ").split() if t]


def _number(s: str):
    v = float(s)
    return int(v) if v.is_integer() else v


def _wizard(args, stdin, stdout) -> None:
    """Fill ``args`` in place from prompts; current values are the defaults."""
    stdout.write("esprofile experiment configurator (press Enter to accept a default)\n")
    args.dataset = _ask("Dataset CSV path", args.dataset or "", stdin, stdout)
    header = []
    if args.dataset and Path(args.dataset).exists():
        header = _csv_header(args.dataset)
        stdout.write(f"  columns: {', '.join(header)}\n")
    args.target = _ask("Target column", args.target or (header[-1] if header else ""), stdin, stdout)
    args.strategy = _ask(f"Strategy ({' / '.join(STRATEGIES)})", args.strategy, stdin, stdout)
    if args.strategy == "custom":
        args.spec_file = _ask("Custom spec file (JSON)", args.spec_file or "", stdin, stdout)
    else:
        args.error_types = _split_list(
            _ask(f"Error types ({', '.join(ERROR_TAGS[:3])})", " ".join(args.error_types), stdin, stdout)
        )
        if args.strategy == "correlated_features":
            args.threshold = float(_ask("Correlation threshold", repr(args.threshold), stdin, stdout))
        else:
            args.features = _split_list(_ask("Features to corrupt ('all' or names)", " ".join(args.features), stdin, stdout))
    args.models = _split_list(_ask(f"Models ({' '.join(MODEL_LABELS)})", " ".join(args.models), stdin, stdout))
    args.schedule = [_number(t) for t in _split_list(_ask("Severity schedule (%)", " ".join(map(str, args.schedule)), stdin, stdout))]
    args.repetitions = int(_ask("Repetitions", str(args.repetitions), stdin, stdout))
    args.metric = _ask("Metric (f1 / accuracy)", args.metric, stdin, stdout)
    pc = _ask("Positive class (blank for the second category)", args.positive_class or "", stdin, stdout)
    args.positive_class = pc or None
    args.master_seed = int(_ask("Master seed", str(args.master_seed), stdin, stdout))
    args.output_dir = _ask("Output directory", args.output_dir, stdin, stdout)


def _strategy_block(args) -> dict:
    if args.strategy == "one_feature_at_a_time":
        feats = args.features
        return {
            "kind": args.strategy,
            "error_types": list(args.error_types),
            "features": "all" if feats in (["all"], []) else list(feats),
        }
    if args.strategy == "correlated_features":
        return {"kind": args.strategy, "error_types": list(args.error_types), "threshold": args.threshold}
    if args.strategy == "custom":
        if not args.spec_file:
            raise ValidationFailure("custom strategy needs a spec file", "strategies/0/specs")
        doc = json.loads(Path(args.spec_file).read_text(encoding="utf-8"))
        specs = doc["specs"] if isinstance(doc, dict) else doc
        return {"kind": "custom", "specs": specs}
    raise ValidationFailure(f"unknown strategy {args.strategy!r}", "strategies/0/kind")


def _relative_to_config(path: str | None, config: str | None) -> str:
    # the written config resolves dataset paths against its own directory
    if not path or Path(path).is_absolute() or config in (None, "-"):
        return path or ""
    return os.path.relpath(Path(path).resolve(), Path(config).resolve().parent)


def config_from_args(args) -> dict:
    metric = {"tag": args.metric}
    if args.positive_class:
        metric["positive_class"] = args.positive_class
    doc = {
        "schema_version": 1,
        "dataset": {"path": _relative_to_config(args.dataset, args.config), "target": args.target or ""},
        "strategies": [_strategy_block(args)],
        "models": list(args.models),
        "schedule": list(args.schedule),
        "repetitions": args.repetitions,
        "metric": metric,
        "master_seed": args.master_seed,
        "split_ratio": args.split_ratio,
        "alpha": args.alpha,
        "delta": args.delta,
        "output_dir": args.output_dir,
    }
    validate_config(doc)
    # round-trip through the dataclass so both paths serialise identically
    return ExperimentConfig.from_json(doc).to_json()


def cmd_configure(args, stdin, stdout) -> int:
    if not args.non_interactive:
        _wizard(args, stdin, stdout)
    doc = config_from_args(args)
    if args.dataset and Path(args.dataset).exists():
        cfg = ExperimentConfig.from_json(doc)
        # the written path is relative to the config; count against the given one
        cfg = dataclasses.replace(cfg, dataset_path=args.dataset)
        n = len(enumerate_scenarios(cfg, cfg.load_dataset()))
        summary = f"{n} scenarios x {cfg.repetitions} repetitions"
    else:
        summary = "dataset not found, scenario count unknown"
    text = json.dumps(doc, indent=2) + "\n"
    if args.config in (None, "-"):
        stdout.write(text)
    else:
        Path(args.config).write_text(text, encoding="utf-8")
        sys.stderr.write(f"wrote {args.config} ({summary})\n")
    return EXIT_OK


# -- run / analyze / report -------------------------------------------------


def cmd_run(args, stdin, stdout) -> int:
    if not args.config:
        raise UsageError("run needs --config")
    cfg = ExperimentConfig.load(args.config)
    out = args.out
    if out is None:
        # the config's own output_dir is relative to the config file
        out = str(Path(args.config).resolve().parent / cfg.output_dir)
    if (Path(out) / RunStore.MANIFEST).exists() and not args.resume:
        raise ValidationFailure(f"{out} already holds a run store; pass --resume to continue it", "output_dir")
    store = run_experiment(cfg, out, workers=args.workers, resume=True)
    stdout.write(json.dumps({"store": str(out), "records": len(store.records), "digest": store.digest()}) + "\n")
    return EXIT_OK


def cmd_analyze(args, stdin, stdout) -> int:
    store = args.store or args.out or default_output_dir()
    deltas = args.delta or [0.05]
    doc = analyze(store, alpha=args.alpha, deltas=deltas, facts=not args.no_dataset_facts)
    for s in doc["summaries"]:
        stdout.write(format_summary(s))
    return EXIT_OK


def cmd_report(args, stdin, stdout) -> int:
    analysis = load_analysis(args.analysis)
    rep = build_report(analysis, args.scenario)
    text = render_svg(rep) if args.format == "svg" else render_json(rep)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="esprofile", description="Error sensitivity profiling for tabular classifiers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    c = sub.add_parser("configure", help="write an experiment config (wizard or flags)")
    c.add_argument("--config", help="output path for the config JSON ('-' for stdout)")
    c.add_argument("--non-interactive", action="store_true", help="take every value from flags")
    c.add_argument("--dataset")
    c.add_argument("--target")
    c.add_argument("--strategy", default="one_feature_at_a_time", choices=STRATEGIES)
    c.add_argument("--error-types", nargs="+", default=["noisy_values", "outliers"])
    c.add_argument("--features", nargs="+", default=["all"])
    c.add_argument("--threshold", type=float, default=0.5)
    c.add_argument("--spec-file")
    c.add_argument("--models", nargs="+", default=list(MODEL_LABELS))
    c.add_argument("--schedule", nargs="+", type=_number, default=list(DEFAULT_SCHEDULE))
    c.add_argument("--repetitions", type=int, default=30)
    c.add_argument("--metric", default="f1")
    c.add_argument("--positive-class")
    c.add_argument("--master-seed", type=int, default=0)
    c.add_argument("--split-ratio", type=float, default=0.8)
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--delta", type=float, default=0.05)
    c.add_argument("--out", dest="output_dir", default=None, help="output directory recorded in the config")

    r = sub.add_parser("run", help="execute an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="run store directory (default: the config's output_dir)")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--resume", action="store_true", help="continue an existing store")

    a = sub.add_parser("analyze", help="significance filter and summary for a run store")
    a.add_argument("store", nargs="?")
    a.add_argument("--out", help="run store directory (same as the positional argument)")
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--delta", type=float, nargs="+", action="extend", help="one or more relevance cut-offs")
    a.add_argument("--no-dataset-facts", action="store_true", help="skip the importance and correlation rows")

    rp = sub.add_parser("report", help="canonical ESP report for one scenario")
    rp.add_argument("analysis", help="analysis.json or the run store holding it")
    rp.add_argument("scenario", help="scenario id (a unique prefix of at least 6 characters works)")
    rp.add_argument("--format", choices=("svg", "json"), default="svg")
    rp.add_argument("--out", help="write to this file instead of stdout")
    return p


COMMANDS = {"configure": cmd_configure, "run": cmd_run, "analyze": cmd_analyze, "report": cmd_report}


def main(argv=None, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: configure, run, analyze or report")
        if args.command == "configure" and args.output_dir is None:
            args.output_dir = default_output_dir()
        if args.command == "run" and args.workers < 1:
            raise UsageError("--workers must be at least 1")
        return COMMANDS[args.command](args, stdin, stdout)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc)
    except (ValidationFailure, SchemaViolation) as exc:
        return _fail(EXIT_VALIDATION, exc)
    except FileNotFoundError as exc:
        return _fail(EXIT_VALIDATION, exc, exc.filename or "")
    except json.JSONDecodeError as exc:
        return _fail(EXIT_VALIDATION, exc)
    except (ESPError, OSError, ValueError, LookupError, RuntimeError, ArithmeticError) as exc:
        return _fail(EXIT_RUNTIME, exc)


if __name__ == "__main__":
    sys.exit(main())
